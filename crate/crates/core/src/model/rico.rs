//! Ingestion of RICO-style semantic annotation trees.
//!
//! Each document is one screen: a nested node tree with pixel `bounds`
//! (`[x1, y1, x2, y2]`), an optional `componentLabel` and `children`.

use serde_json::Value;

use super::{BBox, Canvas, Category, ComponentNode, LayoutGraph, ModelError, Result};

/// Fixed mapping from RICO semantic component labels to categories.
pub const RICO_LABEL_TABLE: &[(&str, Category)] = &[
    ("Advertisement", Category::Image),
    ("Background Image", Category::Image),
    ("Bottom Navigation", Category::Background),
    ("Button Bar", Category::Background),
    ("Card", Category::Background),
    ("Checkbox", Category::Input),
    ("Date Picker", Category::Input),
    ("Drawer", Category::Background),
    ("Icon", Category::Icon),
    ("Image", Category::Image),
    ("Input", Category::Input),
    ("List Item", Category::Background),
    ("Map View", Category::Image),
    ("Modal", Category::Background),
    ("Multi-Tab", Category::Background),
    ("Number Stepper", Category::Input),
    ("On/Off Switch", Category::Input),
    ("Pager Indicator", Category::SlidingBar),
    ("Radio Button", Category::Input),
    ("Slider", Category::SlidingBar),
    ("Text", Category::Text),
    ("Text Button", Category::Text),
    ("Toolbar", Category::Background),
    ("Video", Category::Image),
    ("Web View", Category::Image),
];

/// Maps a RICO label to a category. Labels outside the table (and unlabeled
/// nodes) become IMAGE, or BACKGROUND when they have children.
pub fn map_rico_label(label: Option<&str>, has_children: bool) -> Category {
    label
        .and_then(|l| {
            RICO_LABEL_TABLE
                .iter()
                .find(|(name, _)| *name == l)
                .map(|(_, c)| *c)
        })
        .unwrap_or(if has_children {
            Category::Background
        } else {
            Category::Image
        })
}

fn byte_offset(text: &[u8], line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let mut current = 1;
    let mut line_start = 0;
    for (i, b) in text.iter().enumerate() {
        if current == line {
            break;
        }
        if *b == b'\n' {
            current += 1;
            line_start = i + 1;
        }
    }
    (line_start + column.saturating_sub(1)).min(text.len())
}

pub(crate) fn json_error(text: &[u8], err: serde_json::Error) -> ModelError {
    ModelError::Json {
        offset: byte_offset(text, err.line(), err.column()),
        message: err.to_string(),
    }
}

/// Parses one RICO semantic document into a layout graph.
///
/// Zero-area nodes are skipped (their children are still visited). Node ids
/// follow depth-first pre-order starting at 1.
pub fn parse_rico_document(bytes: &[u8], canvas: Canvas) -> Result<LayoutGraph> {
    let canvas = Canvas::new(canvas.width, canvas.height)?;
    let root: Value = serde_json::from_slice(bytes).map_err(|e| json_error(bytes, e))?;
    let mut nodes = Vec::new();
    visit(&root, canvas, &mut nodes)?;
    if nodes.is_empty() {
        return Err(ModelError::EmptyDocument);
    }
    LayoutGraph::new(canvas, nodes)
}

fn visit(value: &Value, canvas: Canvas, out: &mut Vec<ComponentNode>) -> Result<()> {
    let Some(obj) = value.as_object() else {
        return Ok(());
    };
    let children: &[Value] = obj
        .get("children")
        .and_then(Value::as_array)
        .map(Vec::as_slice)
        .unwrap_or(&[]);
    let label = obj.get("componentLabel").and_then(Value::as_str);

    if let Some(bounds) = obj.get("bounds").and_then(read_bounds) {
        let [x1, y1, x2, y2] = bounds;
        if x2 > x1 && y2 > y1 {
            let node_id = out.len() as u32 + 1;
            let display = label
                .or_else(|| obj.get("class").and_then(Value::as_str))
                .unwrap_or("unlabeled")
                .to_string();
            if x1 < 0 || y1 < 0 || x2 > canvas.width as i64 || y2 > canvas.height as i64 {
                return Err(ModelError::OutOfCanvas {
                    node: node_id,
                    label: display,
                    bounds,
                    width: canvas.width,
                    height: canvas.height,
                });
            }
            let category = map_rico_label(label, !children.is_empty());
            let bbox = BBox::from_pixel_bounds(bounds, canvas)
                .map_err(|reason| ModelError::InvalidBox { node: node_id, reason })?;
            let payload = content_payload(obj, category, &display);
            out.push(ComponentNode::new(node_id, category, bbox).with_payload(payload));
        }
    }
    for child in children {
        visit(child, canvas, out)?;
    }
    Ok(())
}

fn read_bounds(v: &Value) -> Option<[i64; 4]> {
    let arr = v.as_array()?;
    if arr.len() != 4 {
        return None;
    }
    let mut out = [0i64; 4];
    for (slot, item) in out.iter_mut().zip(arr) {
        *slot = item.as_i64().or_else(|| item.as_f64().map(|f| f.round() as i64))?;
    }
    Some(out)
}

fn content_payload(obj: &serde_json::Map<String, Value>, category: Category, display: &str) -> String {
    let field = match category {
        Category::Text => "text",
        Category::Icon => "iconClass",
        Category::Image => "resource-id",
        _ => return String::new(),
    };
    obj.get(field)
        .and_then(Value::as_str)
        .map(str::to_string)
        .unwrap_or_else(|| display.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_canvas_root_is_background() {
        let doc = br#"{"bounds":[0,0,1440,2560],"children":[
            {"bounds":[0,0,720,128],"componentLabel":"Text","text":"Hello"}]}"#;
        let g = parse_rico_document(doc, Canvas::RICO).unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g.nodes()[0].category, Category::Background);
        assert_eq!(g.nodes()[0].bbox, BBox::FULL);
        let t = &g.nodes()[1];
        assert_eq!(t.category, Category::Text);
        assert_eq!((t.bbox.x, t.bbox.y, t.bbox.w, t.bbox.h), (0.25, 0.025, 0.5, 0.05));
        assert_eq!(t.content.payload, "Hello");
    }

    #[test]
    fn out_of_canvas_names_node() {
        let doc = br#"{"bounds":[0,0,1440,2560],"children":[
            {"bounds":[0,0,100,100],"componentLabel":"Icon"},
            {"bounds":[1400,0,1500,100],"componentLabel":"Image"}]}"#;
        match parse_rico_document(doc, Canvas::RICO) {
            Err(ModelError::OutOfCanvas { node, label, .. }) => {
                assert_eq!(node, 3);
                assert_eq!(label, "Image");
            }
            other => panic!("expected out-of-canvas error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_json_reports_offset() {
        let doc = b"{\"bounds\": [0,0,1,1],\n \"children\": [}";
        match parse_rico_document(doc, Canvas::RICO) {
            Err(ModelError::Json { offset, .. }) => assert!(offset > 20 && offset <= doc.len()),
            other => panic!("expected json error, got {other:?}"),
        }
    }

    #[test]
    fn empty_tree_is_rejected() {
        assert_eq!(
            parse_rico_document(b"{}", Canvas::RICO),
            Err(ModelError::EmptyDocument)
        );
        assert_eq!(
            parse_rico_document(br#"{"bounds":[0,0,0,0]}"#, Canvas::RICO),
            Err(ModelError::EmptyDocument)
        );
    }

    #[test]
    fn label_mapping_is_total() {
        for (label, cat) in RICO_LABEL_TABLE {
            assert_eq!(map_rico_label(Some(label), false), *cat);
            assert_eq!(map_rico_label(Some(label), true), *cat);
        }
        assert_eq!(map_rico_label(Some("Mystery"), false), Category::Image);
        assert_eq!(map_rico_label(None, true), Category::Background);
        assert_eq!(RICO_LABEL_TABLE.len(), 25);
    }
}
