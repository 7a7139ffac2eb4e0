//! Proportional band allocation inside a parent box.
//!
//! A parent's interior (its box inset by [`MARGIN`] of its size on each side)
//! is cut into horizontal row bands, and each band into column cells. Sizes
//! are proportional to member weights; members with a fixed box pin their
//! band or cell and the free runs between pins share what is left.

use crate::model::BBox;

/// Interior inset, as a fraction of the parent's width/height.
pub const MARGIN: f64 = 0.01;
/// Smallest normalized width or height a solved box may have.
pub const MIN_SIZE: f64 = 0.01;
const PIN_TOL: f64 = 1e-9;
/// Overlap tolerated between consecutive fixed boxes, about two pixels on a
/// 1440 wide canvas.
const PIN_SLACK: f64 = 1.5e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub left: f64,
    pub top: f64,
    pub right: f64,
    pub bottom: f64,
}

impl Rect {
    pub fn of(b: &BBox) -> Self {
        Rect {
            left: b.left(),
            top: b.top(),
            right: b.right(),
            bottom: b.bottom(),
        }
    }
}

pub fn interior(parent: &BBox) -> Rect {
    let mx = MARGIN * parent.w;
    let my = MARGIN * parent.h;
    Rect {
        left: parent.left() + mx,
        top: parent.top() + my,
        right: parent.right() - mx,
        bottom: parent.bottom() - my,
    }
}

/// The interior grown over fixed members that sit in the margin band but
/// still inside `parent` itself, as pixel-rounded boxes often do.
fn widened(parent: &BBox, rows: &[Vec<Member>]) -> Rect {
    let outer = Rect::of(parent);
    let mut r = interior(parent);
    for b in rows.iter().flatten().filter_map(|m| m.fixed) {
        r.left = r.left.min(b.left().max(outer.left));
        r.top = r.top.min(b.top().max(outer.top));
        r.right = r.right.max(b.right().min(outer.right));
        r.bottom = r.bottom.max(b.bottom().min(outer.bottom));
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Member {
    pub node: usize,
    pub weight: f64,
    pub fixed: Option<BBox>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BandError {
    /// A solved box would be smaller than [`MIN_SIZE`].
    TooSmall { node: usize },
    /// A fixed box pokes out of the parent interior.
    OutsideParent { node: usize },
    /// Fixed boxes overlap along the allocation axis or arrive out of order.
    PinClash { a: usize, b: usize },
}

/// One slot along an axis: its weight, an optional pinned extent and the
/// node used for error reporting.
#[derive(Debug, Clone, Copy)]
pub struct Slot {
    pub weight: f64,
    pub pin: Option<(f64, f64)>,
    pub node: usize,
}

/// Splits `[start, end]` into consecutive extents, one per slot.
pub fn split_axis(start: f64, end: f64, slots: &[Slot]) -> Result<Vec<(f64, f64)>, BandError> {
    let mut out = vec![(0.0, 0.0); slots.len()];
    let mut cursor = start;
    let mut run_start = 0usize;
    let mut last_pinned: Option<usize> = None;
    for k in 0..=slots.len() {
        let pin = slots.get(k).and_then(|s| s.pin);
        if k < slots.len() && pin.is_none() {
            continue;
        }
        let seg_end = match pin {
            Some((lo, hi)) => {
                let node = slots[k].node;
                if lo < start - PIN_TOL || hi > end + PIN_TOL {
                    return Err(BandError::OutsideParent { node });
                }
                if lo < cursor - PIN_SLACK {
                    let other = last_pinned.map_or(node, |p| slots[p].node);
                    return Err(BandError::PinClash { a: other, b: node });
                }
                lo.max(cursor)
            }
            None => end,
        };
        fill_run(cursor, seg_end, &slots[run_start..k], &mut out[run_start..k])?;
        if let Some((lo, hi)) = pin {
            out[k] = (lo, hi);
            cursor = hi;
            last_pinned = Some(k);
        }
        run_start = k + 1;
    }
    Ok(out)
}

fn fill_run(start: f64, end: f64, slots: &[Slot], out: &mut [(f64, f64)]) -> Result<(), BandError> {
    if slots.is_empty() {
        return Ok(());
    }
    let total: f64 = slots.iter().map(|s| s.weight).sum();
    let len = end - start;
    let mut acc = 0.0;
    let mut prev = start;
    for (k, s) in slots.iter().enumerate() {
        acc += s.weight;
        let edge = if k + 1 == slots.len() {
            end
        } else {
            start + len * acc / total
        };
        if edge - prev < MIN_SIZE {
            return Err(BandError::TooSmall { node: s.node });
        }
        out[k] = (prev, edge);
        prev = edge;
    }
    Ok(())
}

/// Lays out rows of members inside `parent`. Rows run top to bottom, members
/// within a row left to right. Returns one box per member in input order.
pub fn layout_rows(parent: &BBox, rows: &[Vec<Member>]) -> Result<Vec<(usize, BBox)>, BandError> {
    let inner = widened(parent, rows);
    let row_slots: Vec<Slot> = rows
        .iter()
        .map(|row| {
            let pins: Vec<BBox> = row.iter().filter_map(|m| m.fixed).collect();
            Slot {
                weight: row.iter().map(|m| m.weight).sum(),
                pin: (!pins.is_empty()).then(|| {
                    let lo = pins.iter().map(BBox::top).fold(f64::INFINITY, f64::min);
                    let hi = pins.iter().map(BBox::bottom).fold(f64::NEG_INFINITY, f64::max);
                    (lo, hi)
                }),
                node: row.first().map_or(0, |m| m.node),
            }
        })
        .collect();
    let ys = split_axis(inner.top, inner.bottom, &row_slots)?;

    let mut out = Vec::new();
    for (row, &(y0, y1)) in rows.iter().zip(&ys) {
        let col_slots: Vec<Slot> = row
            .iter()
            .map(|m| Slot {
                weight: m.weight,
                pin: m.fixed.map(|b| (b.left(), b.right())),
                node: m.node,
            })
            .collect();
        let xs = split_axis(inner.left, inner.right, &col_slots)?;
        for (m, &(x0, x1)) in row.iter().zip(&xs) {
            let b = match m.fixed {
                Some(b) => b,
                None => cell_box(m.node, x0, y0, x1, y1)?,
            };
            out.push((m.node, b));
        }
    }
    Ok(out)
}

pub fn cell_box(node: usize, x0: f64, y0: f64, x1: f64, y1: f64) -> Result<BBox, BandError> {
    if x1 - x0 < MIN_SIZE || y1 - y0 < MIN_SIZE {
        return Err(BandError::TooSmall { node });
    }
    BBox::from_edges(x0, y0, x1, y1).map_err(|_| BandError::TooSmall { node })
}
