//! C ABI for the layout workbench.
//!
//! Layouts cross the boundary as opaque [`LwLayout`] handles; documents
//! (Listing records, relation matrices, RICO screens) cross as UTF-8 JSON.
//! Every function returns an [`LwStatus`]; on failure the message is kept
//! per thread and read back with [`lw_last_error`]. Strings handed out by
//! the library are released with [`lw_string_free`], handles with
//! [`lw_layout_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use layout_workbench::dataset::mask_graph;
use layout_workbench::metrics::{max_iou, overlap, relation_error};
use layout_workbench::model::{parse_layout, parse_rico_document, serialize_layout, Canvas, LayoutGraph};
use layout_workbench::relations::{derive_relations, validate, RelationMatrix};
use layout_workbench::synth::{complete, BackendRegistry, ConstraintMode, GenerationRequest, SynthError};

/// Result of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LwStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidLayout = 3,
    InvalidRelations = 4,
    Conflicts = 5,
    Infeasible = 6,
    InvalidRequest = 7,
    Panic = 8,
}

/// A layout graph together with its relation matrix.
pub struct LwLayout {
    graph: LayoutGraph,
    relations: RelationMatrix,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(LwStatus, String);

impl Failure {
    fn new(status: LwStatus, msg: impl ToString) -> Self {
        Failure(status, msg.to_string())
    }
}

impl From<SynthError> for Failure {
    fn from(e: SynthError) -> Self {
        let status = match &e {
            SynthError::Conflicts(_) => LwStatus::Conflicts,
            SynthError::Infeasible { .. } | SynthError::ContractViolation { .. } => LwStatus::Infeasible,
            _ => LwStatus::InvalidRequest,
        };
        Failure(status, e.to_string())
    }
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).expect("nul bytes replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> LwStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            LwStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            LwStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(LwStatus::NullArgument, "null string argument"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure::new(LwStatus::InvalidUtf8, e))
}

unsafe fn layout<'a>(p: *const LwLayout) -> Result<&'a LwLayout, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure::new(LwStatus::NullArgument, "null layout handle"))
}

fn out_ptr<T>(out: *mut T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::new(LwStatus::NullArgument, "null output pointer"));
    }
    Ok(())
}

unsafe fn hand_out(out: *mut *mut LwLayout, graph: LayoutGraph, relations: RelationMatrix) {
    *out = Box::into_raw(Box::new(LwLayout { graph, relations }));
}

fn canvas(width: u32, height: u32) -> Result<Canvas, Failure> {
    Canvas::new(width, height).map_err(|e| Failure::new(LwStatus::InvalidRequest, e))
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call on the same thread.
#[no_mangle]
pub extern "C" fn lw_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Parses a Listing document drawn on a `width` x `height` canvas.
///
/// # Safety
/// `json` must be a nul-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn lw_layout_parse(
    json: *const c_char,
    width: u32,
    height: u32,
    out: *mut *mut LwLayout,
) -> LwStatus {
    guard(|| {
        out_ptr(out)?;
        let (graph, relations) =
            parse_layout(text(json)?, canvas(width, height)?).map_err(|e| Failure::new(LwStatus::InvalidLayout, e))?;
        hand_out(out, graph, relations);
        Ok(())
    })
}

/// Ingests one RICO screen; relations are derived from its geometry.
///
/// # Safety
/// `json` must be a nul-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn lw_layout_from_rico(
    json: *const c_char,
    width: u32,
    height: u32,
    out: *mut *mut LwLayout,
) -> LwStatus {
    guard(|| {
        out_ptr(out)?;
        let graph = parse_rico_document(text(json)?.as_bytes(), canvas(width, height)?)
            .map_err(|e| Failure::new(LwStatus::InvalidLayout, e))?;
        let relations = derive_relations(&graph);
        hand_out(out, graph, relations);
        Ok(())
    })
}

/// Writes the layout as a Listing document into `*out`.
///
/// # Safety
/// `layout` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn lw_layout_serialize(layout: *const LwLayout, out: *mut *mut c_char) -> LwStatus {
    guard(|| {
        out_ptr(out)?;
        let l = self::layout(layout)?;
        let s = serialize_layout(&l.graph, &l.relations).map_err(|e| Failure::new(LwStatus::InvalidLayout, e))?;
        *out = CString::new(s).expect("JSON has no nul bytes").into_raw();
        Ok(())
    })
}

/// Writes the relation matrix as JSON into `*out`.
///
/// # Safety
/// `layout` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn lw_layout_relations(layout: *const LwLayout, out: *mut *mut c_char) -> LwStatus {
    guard(|| {
        out_ptr(out)?;
        let l = self::layout(layout)?;
        let s = serde_json::to_string(&l.relations).map_err(|e| Failure::new(LwStatus::InvalidRelations, e))?;
        *out = CString::new(s).expect("JSON has no nul bytes").into_raw();
        Ok(())
    })
}

/// Number of nodes in the layout.
///
/// # Safety
/// `layout` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn lw_layout_node_count(layout: *const LwLayout, out: *mut usize) -> LwStatus {
    guard(|| {
        out_ptr(out)?;
        *out = self::layout(layout)?.graph.len();
        Ok(())
    })
}

/// Replaces the layout's relations with the ones its geometry implies.
///
/// # Safety
/// `layout` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn lw_layout_derive(layout: *mut LwLayout) -> LwStatus {
    guard(|| {
        let l = layout
            .as_mut()
            .ok_or_else(|| Failure::new(LwStatus::NullArgument, "null layout handle"))?;
        l.relations = derive_relations(&l.graph);
        Ok(())
    })
}

/// Counts the conflicts in the layout's relation matrix.
///
/// # Safety
/// `layout` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn lw_layout_conflicts(layout: *const LwLayout, out: *mut usize) -> LwStatus {
    guard(|| {
        out_ptr(out)?;
        *out = validate(&self::layout(layout)?.relations).len();
        Ok(())
    })
}

/// Generates a layout for a relation matrix given as JSON. `asserted`
/// selects asserted mode; otherwise every entry binds.
///
/// # Safety
/// `relations_json` must be a nul-terminated string and `out` a writable
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn lw_generate(
    relations_json: *const c_char,
    width: u32,
    height: u32,
    seed: u64,
    asserted: bool,
    out: *mut *mut LwLayout,
) -> LwStatus {
    guard(|| {
        out_ptr(out)?;
        let m: RelationMatrix = serde_json::from_str(text(relations_json)?)
            .map_err(|e| Failure::new(LwStatus::InvalidRelations, e))?;
        let mode = if asserted {
            ConstraintMode::Asserted
        } else {
            ConstraintMode::Exact
        };
        let req = GenerationRequest::new(m.clone(), canvas(width, height)?)
            .with_seed(seed)
            .with_mode(mode);
        let res = BackendRegistry::with_solver().generate(&req)?;
        hand_out(out, res.layout, m);
        Ok(())
    })
}

/// Masks `ratio` of the layout's nodes and fills them back in against its
/// relations.
///
/// # Safety
/// `layout` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn lw_complete(
    layout: *const LwLayout,
    ratio: f64,
    seed: u64,
    out: *mut *mut LwLayout,
) -> LwStatus {
    guard(|| {
        out_ptr(out)?;
        let l = self::layout(layout)?;
        let masked =
            mask_graph(&l.graph, &l.relations, ratio, seed).map_err(|e| Failure::new(LwStatus::InvalidRequest, e))?;
        let res = complete(&masked, &l.relations, seed)?;
        hand_out(out, res.layout, l.relations.clone());
        Ok(())
    })
}

/// Relation error between the geometry-derived relations of two layouts.
///
/// # Safety
/// Both handles must be live and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn lw_relation_error(a: *const LwLayout, b: *const LwLayout, out: *mut f64) -> LwStatus {
    guard(|| {
        out_ptr(out)?;
        let (a, b) = (layout(a)?, layout(b)?);
        *out = relation_error(&derive_relations(&a.graph), &derive_relations(&b.graph))
            .map_err(|e| Failure::new(LwStatus::InvalidRequest, e))?;
        Ok(())
    })
}

/// Maximum-matching mean IoU of `generated` against `reference`.
///
/// # Safety
/// Both handles must be live and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn lw_max_iou(generated: *const LwLayout, reference: *const LwLayout, out: *mut f64) -> LwStatus {
    guard(|| {
        out_ptr(out)?;
        *out = max_iou(&layout(generated)?.graph, &layout(reference)?.graph);
        Ok(())
    })
}

/// Overlap score of one layout.
///
/// # Safety
/// `layout` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn lw_overlap(layout: *const LwLayout, out: *mut f64) -> LwStatus {
    guard(|| {
        out_ptr(out)?;
        *out = overlap(&self::layout(layout)?.graph);
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `layout` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lw_layout_free(layout: *mut LwLayout) {
    if !layout.is_null() {
        drop(Box::from_raw(layout));
    }
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lw_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
