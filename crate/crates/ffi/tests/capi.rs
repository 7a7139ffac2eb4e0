use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use layout_workbench::dataset::synthesize_random_layout;
use layout_workbench::model::serialize_layout;
use layout_workbench::relations::{derive_relations, RelationChannel, RelationMatrix};
use layout_workbench_ffi::*;

const W: u32 = 1440;
const H: u32 = 2560;

fn listing(n: usize, seed: u64) -> CString {
    let g = synthesize_random_layout(n, seed).unwrap();
    CString::new(serialize_layout(&g, &derive_relations(&g)).unwrap()).unwrap()
}

fn parsed(text: &CString) -> *mut LwLayout {
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { lw_layout_parse(text.as_ptr(), W, H, &mut out) }, LwStatus::Ok);
    assert!(!out.is_null());
    out
}

fn last_error() -> String {
    let p = lw_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn listing_round_trips_through_handle() {
    let text = listing(9, 3);
    let l = parsed(&text);
    let mut n = 0usize;
    let mut s = ptr::null_mut();
    unsafe {
        assert_eq!(lw_layout_node_count(l, &mut n), LwStatus::Ok);
        assert_eq!(lw_layout_serialize(l, &mut s), LwStatus::Ok);
        assert_eq!(CStr::from_ptr(s), text.as_c_str());
        lw_string_free(s);
        lw_layout_free(l);
    }
    assert_eq!(n, 9);
    assert!(lw_last_error().is_null());
}

#[test]
fn errors_carry_status_and_message() {
    let mut out = ptr::null_mut();
    let bad = CString::new(r#"[{"Node_id":"1","Category":"BUTTON","Coordinate":[720,1280,1440,2560],"Top":[],"Left":[],"Parallel":[],"Contain":[]}]"#).unwrap();
    unsafe {
        assert_eq!(lw_layout_parse(bad.as_ptr(), W, H, &mut out), LwStatus::InvalidLayout);
        assert!(out.is_null());
        assert!(last_error().contains("BUTTON"));
        assert_eq!(lw_layout_parse(ptr::null(), W, H, &mut out), LwStatus::NullArgument);
        let ok = listing(3, 1);
        assert_eq!(lw_layout_parse(ok.as_ptr(), W, H, ptr::null_mut()), LwStatus::NullArgument);
        assert_eq!(lw_layout_parse(ok.as_ptr(), 0, H, &mut out), LwStatus::InvalidRequest);
        let raw = [0xffu8, 0xfe, 0];
        assert_eq!(
            lw_layout_parse(raw.as_ptr().cast(), W, H, &mut out),
            LwStatus::InvalidUtf8
        );
        let mut n = 0usize;
        assert_eq!(lw_layout_node_count(ptr::null(), &mut n), LwStatus::NullArgument);
        lw_layout_free(ptr::null_mut());
        lw_string_free(ptr::null_mut());
    }
}

#[test]
fn generate_reproduces_relations() {
    let g = synthesize_random_layout(12, 8).unwrap();
    let m = derive_relations(&g);
    let json = CString::new(serde_json::to_string(&m).unwrap()).unwrap();
    let reference = parsed(&CString::new(serialize_layout(&g, &m).unwrap()).unwrap());
    let mut out = ptr::null_mut();
    let (mut re, mut iou, mut ol, mut conflicts) = (1.0, 0.0, 1.0, 9usize);
    unsafe {
        assert_eq!(lw_generate(json.as_ptr(), W, H, 4, false, &mut out), LwStatus::Ok);
        assert_eq!(lw_relation_error(out, reference, &mut re), LwStatus::Ok);
        assert_eq!(lw_max_iou(out, out, &mut iou), LwStatus::Ok);
        assert_eq!(lw_overlap(out, &mut ol), LwStatus::Ok);
        assert_eq!(lw_layout_conflicts(out, &mut conflicts), LwStatus::Ok);
        let mut rel = ptr::null_mut();
        assert_eq!(lw_layout_relations(out, &mut rel), LwStatus::Ok);
        let back: RelationMatrix = serde_json::from_str(CStr::from_ptr(rel).to_str().unwrap()).unwrap();
        lw_string_free(rel);
        assert!(back.values_eq(&m));
        lw_layout_free(out);
        lw_layout_free(reference);
    }
    assert_eq!(re, 0.0);
    assert!((iou - 1.0).abs() < 1e-12);
    assert!(ol.is_finite());
    assert_eq!(conflicts, 0);
}

#[test]
fn conflicting_and_infeasible_requests() {
    let mut m = RelationMatrix::zeros(3);
    m.set(RelationChannel::Top, 1, 2, true, false);
    m.set(RelationChannel::Top, 2, 1, true, false);
    let json = CString::new(serde_json::to_string(&m).unwrap()).unwrap();
    let mut out = ptr::null_mut();
    unsafe {
        assert_eq!(lw_generate(json.as_ptr(), W, H, 0, false, &mut out), LwStatus::Conflicts);
        assert!(out.is_null());
        let mut bad = RelationMatrix::zeros(3);
        bad.set(RelationChannel::Contain, 0, 1, true, false);
        bad.set(RelationChannel::Top, 1, 0, true, false);
        let json = CString::new(serde_json::to_string(&bad).unwrap()).unwrap();
        assert_eq!(lw_generate(json.as_ptr(), W, H, 0, false, &mut out), LwStatus::Infeasible);
        let junk = CString::new("{}").unwrap();
        assert_eq!(lw_generate(junk.as_ptr(), W, H, 0, false, &mut out), LwStatus::InvalidRelations);
    }
}

#[test]
fn completion_keeps_relations() {
    let text = listing(14, 21);
    let l = parsed(&text);
    let mut done = ptr::null_mut();
    let mut re = 1.0;
    unsafe {
        assert_eq!(lw_complete(l, 0.15, 5, &mut done), LwStatus::Ok);
        assert_eq!(lw_relation_error(done, l, &mut re), LwStatus::Ok);
        assert_eq!(lw_complete(l, 0.9, 5, &mut done), LwStatus::InvalidRequest);
        lw_layout_free(done);
        lw_layout_free(l);
    }
    assert_eq!(re, 0.0);
}

#[test]
fn derive_and_rico_ingest() {
    let doc = CString::new(
        r#"{"bounds":[0,0,1440,2560],"children":[
            {"bounds":[0,0,1440,240],"componentLabel":"Toolbar","children":[{"bounds":[40,40,200,200],"componentLabel":"Icon"}]},
            {"bounds":[80,400,1360,1000],"componentLabel":"Image"}]}"#,
    )
    .unwrap();
    let mut l = ptr::null_mut();
    let mut n = 0usize;
    let mut s = ptr::null_mut();
    unsafe {
        assert_eq!(lw_layout_from_rico(doc.as_ptr(), W, H, &mut l), LwStatus::Ok);
        assert_eq!(lw_layout_derive(l), LwStatus::Ok);
        assert_eq!(lw_layout_node_count(l, &mut n), LwStatus::Ok);
        assert_eq!(lw_layout_serialize(l, &mut s), LwStatus::Ok);
        let text = CStr::from_ptr(s).to_str().unwrap().to_string();
        lw_string_free(s);
        lw_layout_free(l);
        assert!(text.contains("BACKGROUND") && text.contains("ICON"));
    }
    assert_eq!(n, 4);
}

fn target_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn header_compiles_and_links_from_c() {
    let lib = target_dir().join("liblayout_workbench_ffi.a");
    if !lib.exists() {
        eprintln!("skipping: {} not built", lib.display());
        return;
    }
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include <string.h>
#include "layout_workbench.h"

int main(void) {
    const char *doc = "{\"bounds\":[0,0,1440,2560],\"children\":[{\"bounds\":[80,400,1360,1000],\"componentLabel\":\"Image\"}]}";
    LwLayout *l = NULL;
    if (lw_layout_from_rico(doc, 1440, 2560, &l) != LW_STATUS_OK) return 1;
    size_t n = 0;
    if (lw_layout_node_count(l, &n) != LW_STATUS_OK || n != 2) return 2;
    LwLayout *done = NULL;
    if (lw_complete(l, 0.25, 1, &done) != LW_STATUS_OK) return 3;
    double re = 1.0;
    if (lw_relation_error(done, l, &re) != LW_STATUS_OK || re != 0.0) return 4;
    if (lw_layout_parse("[", 1440, 2560, &done) != LW_STATUS_INVALID_LAYOUT) return 5;
    if (lw_last_error() == NULL || strlen(lw_last_error()) == 0) return 6;
    lw_layout_free(done);
    lw_layout_free(l);
    puts("ok");
    return 0;
}
"#,
    )
    .unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "ok");
}
