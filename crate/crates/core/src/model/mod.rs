//! Typed layout graphs: component categories, center-based boxes, content
//! stubs and the graph container itself.
//!
//! Boxes are stored normalized to the canvas (`[0, 1]` on both axes) and
//! converted to integer pixels only at the wire boundary.

mod listing;
mod rico;

pub use listing::{from_records, parse_layout, serialize_layout, to_records, ListingRecord};
pub use rico::{map_rico_label, parse_rico_document, RICO_LABEL_TABLE};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Slack allowed when checking that a box lies inside the canvas.
pub const CANVAS_TOLERANCE: f64 = 1e-9;
/// Intersection extents at or below this are treated as touching edges.
pub const EDGE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("malformed JSON at byte {offset}: {message}")]
    Json { offset: usize, message: String },
    #[error("document contains no layout nodes")]
    EmptyDocument,
    #[error("node {node} ({label}) has bounds {bounds:?} outside the {width}x{height} canvas")]
    OutOfCanvas {
        node: u32,
        label: String,
        bounds: [i64; 4],
        width: u32,
        height: u32,
    },
    #[error("node {node}: invalid box ({reason})")]
    InvalidBox { node: u32, reason: String },
    #[error("node {node}: unknown category {value:?}")]
    UnknownCategory { node: u32, value: String },
    #[error("duplicate Node_id {0}")]
    DuplicateNodeId(u32),
    #[error("invalid Node_id {0:?}")]
    InvalidNodeId(String),
    #[error("node {node} references unknown node {referenced}")]
    UnknownReference { node: u32, referenced: u32 },
    #[error("node {node} lists itself under {field}")]
    SelfReference { node: u32, field: &'static str },
    #[error("nodes {a} and {b} list each other under {field}")]
    Antisymmetry {
        a: u32,
        b: u32,
        field: &'static str,
    },
    #[error("node {a} lists {b} under Parallel but not the reverse")]
    AsymmetricParallel { a: u32, b: u32 },
    #[error("node ids must be exactly 1..={expected}, found {found:?}")]
    NonContiguousIds { expected: usize, found: Vec<u32> },
    #[error("node {node}: content kind {kind:?} does not match category {category}")]
    ContentMismatch {
        node: u32,
        kind: ContentKind,
        category: Category,
    },
    #[error("relation matrix has {found} nodes, graph has {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("canvas dimensions must be positive, got {0}x{1}")]
    InvalidCanvas(u32, u32),
}

pub type Result<T, E = ModelError> = std::result::Result<T, E>;

/// The six component categories of a layout node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    #[serde(rename = "BACKGROUND")]
    Background,
    #[serde(rename = "IMAGE")]
    Image,
    #[serde(rename = "TEXT")]
    Text,
    #[serde(rename = "SLIDING BAR")]
    SlidingBar,
    #[serde(rename = "ICON")]
    Icon,
    #[serde(rename = "INPUT")]
    Input,
}

impl Category {
    pub const ALL: [Category; 6] = [
        Category::Background,
        Category::Image,
        Category::Text,
        Category::SlidingBar,
        Category::Icon,
        Category::Input,
    ];

    /// Categories a leaf component may take.
    pub const LEAF: [Category; 5] = [
        Category::Image,
        Category::Text,
        Category::SlidingBar,
        Category::Icon,
        Category::Input,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Background => "BACKGROUND",
            Category::Image => "IMAGE",
            Category::Text => "TEXT",
            Category::SlidingBar => "SLIDING BAR",
            Category::Icon => "ICON",
            Category::Input => "INPUT",
        }
    }

    /// Content kind a node of this category carries.
    pub fn content_kind(self) -> ContentKind {
        match self {
            Category::Image => ContentKind::Image,
            Category::Icon => ContentKind::Icon,
            Category::Text => ContentKind::Text,
            _ => ContentKind::None,
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| s.to_string())
    }
}

/// Pixel dimensions of the screen a layout lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Canvas {
    pub width: u32,
    pub height: u32,
}

impl Canvas {
    pub const RICO: Canvas = Canvas {
        width: 1440,
        height: 2560,
    };

    pub fn new(width: u32, height: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(ModelError::InvalidCanvas(width, height));
        }
        Ok(Canvas { width, height })
    }
}

impl Default for Canvas {
    fn default() -> Self {
        Canvas::RICO
    }
}

impl FromStr for Canvas {
    type Err = String;

    /// Parses `WIDTHxHEIGHT`, e.g. `1440x2560`.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let (w, h) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| format!("expected WIDTHxHEIGHT, got {s:?}"))?;
        let w: u32 = w.trim().parse().map_err(|e| format!("width: {e}"))?;
        let h: u32 = h.trim().parse().map_err(|e| format!("height: {e}"))?;
        Canvas::new(w, h).map_err(|e| e.to_string())
    }
}

/// Center-based, canvas-normalized bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub const FULL: BBox = BBox {
        x: 0.5,
        y: 0.5,
        w: 1.0,
        h: 1.0,
    };

    /// Builds a box, rejecting non-finite values and non-positive sizes.
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> std::result::Result<Self, String> {
        if !(x.is_finite() && y.is_finite() && w.is_finite() && h.is_finite()) {
            return Err("non-finite coordinate".into());
        }
        if w <= 0.0 || h <= 0.0 {
            return Err(format!("non-positive size {w}x{h}"));
        }
        Ok(BBox { x, y, w, h })
    }

    pub fn from_edges(left: f64, top: f64, right: f64, bottom: f64) -> std::result::Result<Self, String> {
        BBox::new(
            (left + right) / 2.0,
            (top + bottom) / 2.0,
            right - left,
            bottom - top,
        )
    }

    pub fn left(&self) -> f64 {
        self.x - self.w / 2.0
    }

    pub fn right(&self) -> f64 {
        self.x + self.w / 2.0
    }

    pub fn top(&self) -> f64 {
        self.y - self.h / 2.0
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h / 2.0
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Overlap area; boxes that only share an edge, up to rounding, give 0.
    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let w = self.right().min(other.right()) - self.left().max(other.left());
        let h = self.bottom().min(other.bottom()) - self.top().max(other.top());
        if w <= EDGE_TOLERANCE || h <= EDGE_TOLERANCE {
            0.0
        } else {
            w * h
        }
    }

    pub fn iou(&self, other: &BBox) -> f64 {
        if self == other {
            return 1.0;
        }
        let inter = self.intersection_area(other);
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            (inter / union).min(1.0)
        }
    }

    pub fn within_canvas(&self) -> bool {
        self.left() >= -CANVAS_TOLERANCE
            && self.top() >= -CANVAS_TOLERANCE
            && self.right() <= 1.0 + CANVAS_TOLERANCE
            && self.bottom() <= 1.0 + CANVAS_TOLERANCE
    }

    /// True when `inner` lies inside `self` (edges may touch).
    pub fn encloses(&self, inner: &BBox) -> bool {
        inner.left() >= self.left() - CANVAS_TOLERANCE
            && inner.right() <= self.right() + CANVAS_TOLERANCE
            && inner.top() >= self.top() - CANVAS_TOLERANCE
            && inner.bottom() <= self.bottom() + CANVAS_TOLERANCE
    }

    pub fn is_full_canvas(&self) -> bool {
        (self.x - 0.5).abs() <= CANVAS_TOLERANCE
            && (self.y - 0.5).abs() <= CANVAS_TOLERANCE
            && (self.w - 1.0).abs() <= CANVAS_TOLERANCE
            && (self.h - 1.0).abs() <= CANVAS_TOLERANCE
    }

    /// Center-based integer pixel coordinate `[X, Y, W, H]`.
    ///
    /// Rounds half away from zero.
    pub fn to_pixels(&self, canvas: Canvas) -> [i64; 4] {
        let (cw, ch) = (canvas.width as f64, canvas.height as f64);
        [
            (self.x * cw).round() as i64,
            (self.y * ch).round() as i64,
            (self.w * cw).round() as i64,
            (self.h * ch).round() as i64,
        ]
    }

    pub fn from_pixels(px: [i64; 4], canvas: Canvas) -> std::result::Result<Self, String> {
        let (cw, ch) = (canvas.width as f64, canvas.height as f64);
        BBox::new(
            px[0] as f64 / cw,
            px[1] as f64 / ch,
            px[2] as f64 / cw,
            px[3] as f64 / ch,
        )
    }

    /// Corner bounds `[x1, y1, x2, y2]` in pixels, rounded half away from zero.
    pub fn to_pixel_bounds(&self, canvas: Canvas) -> [i64; 4] {
        let (cw, ch) = (canvas.width as f64, canvas.height as f64);
        [
            (self.left() * cw).round() as i64,
            (self.top() * ch).round() as i64,
            (self.right() * cw).round() as i64,
            (self.bottom() * ch).round() as i64,
        ]
    }

    pub fn from_pixel_bounds(bounds: [i64; 4], canvas: Canvas) -> std::result::Result<Self, String> {
        let (cw, ch) = (canvas.width as f64, canvas.height as f64);
        let [x1, y1, x2, y2] = bounds.map(|v| v as f64);
        BBox::new(
            (x1 + x2) / 2.0 / cw,
            (y1 + y2) / 2.0 / ch,
            (x2 - x1) / cw,
            (y2 - y1) / ch,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContentKind {
    Icon,
    Image,
    Text,
    None,
}

/// Opaque content reference; only used to key a deterministic embedding.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ContentStub {
    pub kind: ContentKind,
    pub payload: String,
}

impl ContentStub {
    pub fn for_category(category: Category, payload: impl Into<String>) -> Self {
        let kind = category.content_kind();
        ContentStub {
            kind,
            payload: if kind == ContentKind::None {
                String::new()
            } else {
                payload.into()
            },
        }
    }

    pub fn empty(category: Category) -> Self {
        ContentStub::for_category(category, "")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentNode {
    pub node_id: u32,
    pub category: Category,
    pub bbox: BBox,
    pub content: ContentStub,
}

impl ComponentNode {
    pub fn new(node_id: u32, category: Category, bbox: BBox) -> Self {
        ComponentNode {
            node_id,
            category,
            bbox,
            content: ContentStub::empty(category),
        }
    }

    pub fn with_payload(mut self, payload: impl Into<String>) -> Self {
        self.content = ContentStub::for_category(self.category, payload);
        self
    }
}

/// A canvas plus its component nodes, ordered by `node_id` (`1..=n`).
///
/// Node `k` sits at index `k - 1`; relation matrices use the same indexing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGraph", into = "RawGraph")]
pub struct LayoutGraph {
    canvas: Canvas,
    nodes: Vec<ComponentNode>,
}

#[derive(Serialize, Deserialize)]
struct RawGraph {
    canvas: Canvas,
    nodes: Vec<ComponentNode>,
}

impl TryFrom<RawGraph> for LayoutGraph {
    type Error = ModelError;

    fn try_from(raw: RawGraph) -> Result<Self> {
        LayoutGraph::new(raw.canvas, raw.nodes)
    }
}

impl From<LayoutGraph> for RawGraph {
    fn from(g: LayoutGraph) -> Self {
        RawGraph {
            canvas: g.canvas,
            nodes: g.nodes,
        }
    }
}

impl LayoutGraph {
    /// Sorts nodes by id and checks that ids are exactly `1..=n`, boxes are
    /// well formed and content kinds match categories.
    pub fn new(canvas: Canvas, mut nodes: Vec<ComponentNode>) -> Result<Self> {
        Canvas::new(canvas.width, canvas.height)?;
        if nodes.is_empty() {
            return Err(ModelError::EmptyDocument);
        }
        nodes.sort_by_key(|n| n.node_id);
        for pair in nodes.windows(2) {
            if pair[0].node_id == pair[1].node_id {
                return Err(ModelError::DuplicateNodeId(pair[0].node_id));
            }
        }
        if nodes.iter().enumerate().any(|(i, n)| n.node_id as usize != i + 1) {
            return Err(ModelError::NonContiguousIds {
                expected: nodes.len(),
                found: nodes.iter().map(|n| n.node_id).collect(),
            });
        }
        for node in &nodes {
            let b = node.bbox;
            BBox::new(b.x, b.y, b.w, b.h).map_err(|reason| ModelError::InvalidBox {
                node: node.node_id,
                reason,
            })?;
            if node.content.kind != node.category.content_kind() {
                return Err(ModelError::ContentMismatch {
                    node: node.node_id,
                    kind: node.content.kind,
                    category: node.category,
                });
            }
        }
        Ok(LayoutGraph { canvas, nodes })
    }

    pub fn canvas(&self) -> Canvas {
        self.canvas
    }

    pub fn nodes(&self) -> &[ComponentNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, node_id: u32) -> Option<&ComponentNode> {
        node_id
            .checked_sub(1)
            .and_then(|i| self.nodes.get(i as usize))
    }

    pub fn bboxes(&self) -> Vec<BBox> {
        self.nodes.iter().map(|n| n.bbox).collect()
    }

    /// Index of the designated root: the first full-canvas BACKGROUND node.
    pub fn root(&self) -> Option<usize> {
        self.nodes
            .iter()
            .position(|n| n.category == Category::Background && n.bbox.is_full_canvas())
    }

    /// First node whose box leaves the canvas, if any.
    pub fn check_bounds(&self) -> Result<()> {
        match self.nodes.iter().find(|n| !n.bbox.within_canvas()) {
            None => Ok(()),
            Some(n) => Err(ModelError::OutOfCanvas {
                node: n.node_id,
                label: n.category.to_string(),
                bounds: n.bbox.to_pixel_bounds(self.canvas),
                width: self.canvas.width,
                height: self.canvas.height,
            }),
        }
    }

    /// Multiset of categories as per-category counts.
    pub fn category_histogram(&self) -> [usize; 6] {
        let mut hist = [0usize; 6];
        for n in &self.nodes {
            hist[n.category.index()] += 1;
        }
        hist
    }

    /// Relabels nodes by `perm`: the node at index `i` moves to index `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> LayoutGraph {
        assert_eq!(perm.len(), self.nodes.len());
        let mut nodes = self.nodes.clone();
        for (i, node) in self.nodes.iter().enumerate() {
            let mut moved = node.clone();
            moved.node_id = perm[i] as u32 + 1;
            nodes[perm[i]] = moved;
        }
        LayoutGraph {
            canvas: self.canvas,
            nodes,
        }
    }

    pub fn difficulty(&self) -> Difficulty {
        difficulty(self.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
}

impl Difficulty {
    pub const ALL: [Difficulty; 3] = [Difficulty::Easy, Difficulty::Medium, Difficulty::Hard];

    pub fn as_str(self) -> &'static str {
        match self {
            Difficulty::Easy => "EASY",
            Difficulty::Medium => "MEDIUM",
            Difficulty::Hard => "HARD",
        }
    }
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Difficulty bucket by component count. Eight components count as easy.
pub fn difficulty(node_count: usize) -> Difficulty {
    match node_count {
        0..=8 => Difficulty::Easy,
        9..=20 => Difficulty::Medium,
        _ => Difficulty::Hard,
    }
}
