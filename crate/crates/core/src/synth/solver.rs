//! The deterministic solver backend.
//!
//! Exact mode layers the children of each parent independently: siblings with
//! no TOP relation in either direction share a row, rows follow TOP and
//! members of a row follow LEFT, then rows and columns get proportional
//! bands. Asserted mode first tries the same band layout and, when that does
//! not honour every set entry, solves each axis as a system of linear
//! inequalities by cyclic projection.

use std::collections::{BTreeMap, BTreeSet};

use rand_distr::{weighted::WeightedIndex, Distribution};

use super::bands::{layout_rows, BandError, Member, MIN_SIZE};
use super::{relation_mismatches, ConstraintMode, GenerationRequest, GenerationResult, Provenance, SynthError, Violation};
use crate::dataset::{rng, MaskedGraph, NodeSlot, LEAF_PRIOR};
use crate::model::{BBox, Category, ComponentNode, LayoutGraph};
use crate::relations::{
    contain_forest, derive_relations, validate, ContainForest, RelationChannel, RelationMatrix, POSITION_EPS,
};

/// Group key: the parent of a sibling set, `None` for the roots.
type Group = Option<usize>;

/// Runs the solver on a request.
pub fn synthesize(req: &GenerationRequest) -> Result<GenerationResult, SynthError> {
    req.check_shape()?;
    let m = &req.relations;
    let conflicts = validate(m);
    if !conflicts.is_empty() {
        return Err(SynthError::Conflicts(conflicts));
    }
    let forest = contain_forest(m).expect("validated matrix is a forest");
    let n = m.len();

    let related: Vec<Violation> = [RelationChannel::Top, RelationChannel::Left]
        .into_iter()
        .flat_map(|c| m.entries(c).map(move |(i, j)| (c, i, j)))
        .filter(|&(_, i, j)| forest.related(i, j))
        .map(|(c, i, j)| Violation::at(c, i, j))
        .collect();
    if !related.is_empty() {
        return Err(SynthError::infeasible(
            "positional relation between a node and its ancestor",
            related,
        ));
    }

    let fixed: Vec<Option<BBox>> = (1..=n as u32)
        .map(|id| req.fixed_nodes.get(&id).map(|node| node.bbox))
        .collect();
    for j in 0..n {
        if let (Some(p), Some(cb)) = (forest.parent(j), fixed[j]) {
            if let Some(pb) = fixed[p] {
                if !pb.encloses(&cb) {
                    return Err(SynthError::infeasible(
                        format!("fixed node {} lies outside fixed parent {}", j + 1, p + 1),
                        vec![Violation::at(RelationChannel::Contain, p, j)],
                    ));
                }
            }
        }
    }

    let boxes = match req.mode {
        ConstraintMode::Exact => place_all(m, &forest, &fixed)?,
        ConstraintMode::Asserted => {
            // A derivable matrix is placed exactly; anything else goes on the grid.
            let exact = place_all(m, &forest, &fixed)
                .ok()
                .filter(|b| asserted_hold(req, &forest, b));
            match exact {
                Some(b) => b,
                None if req.fixed_nodes.is_empty() => place_projected(m, &forest)?,
                None => {
                    return Err(SynthError::infeasible(
                        "fixed nodes need a matrix the band layout can reproduce",
                        relation_mismatches(m, &derive_relations(&assemble(req, &forest, &place_all(m, &forest, &fixed)?)?), ConstraintMode::Asserted),
                    ))
                }
            }
        }
    };
    let layout = assemble(req, &forest, &boxes)?;
    let derived = derive_relations(&layout);
    let mismatches = relation_mismatches(m, &derived, req.mode);
    if !mismatches.is_empty() {
        return Err(SynthError::infeasible(
            "placed geometry does not reproduce the requested relations",
            mismatches,
        ));
    }
    let backend_report = (1..=n as u32)
        .map(|id| {
            if req.fixed_nodes.contains_key(&id) {
                Provenance::Fixed
            } else {
                Provenance::Solved
            }
        })
        .collect();
    Ok(GenerationResult {
        layout,
        relations_out: derived,
        backend_report,
        backend: req.backend.clone(),
        insertion: None,
    })
}

fn place_all(
    m: &RelationMatrix,
    forest: &ContainForest,
    fixed: &[Option<BBox>],
) -> Result<Vec<BBox>, SynthError> {
    let n = m.len();
    let weights: Vec<f64> = forest.leaf_counts().into_iter().map(|c| c as f64).collect();
    let mut boxes: Vec<Option<BBox>> = vec![None; n];
    let hulls = fixed_hulls(forest, fixed);
    let roots = forest.roots();
    let mut queue: Vec<(Group, BBox)> = Vec::new();
    if roots.len() == 1 {
        let r = roots[0];
        boxes[r] = Some(fixed[r].unwrap_or(BBox::FULL));
        queue.push((Some(r), boxes[r].unwrap()));
    } else {
        queue.push((None, BBox::FULL));
    }
    while let Some((group, parent_box)) = queue.pop() {
        let members: Vec<usize> = match group {
            Some(p) => forest.children(p).to_vec(),
            None => roots.clone(),
        };
        if members.is_empty() {
            continue;
        }
        let placed = place_exact(m, &members, &weights, fixed, &parent_box)?;
        for (node, cell) in placed {
            boxes[node] = Some(match fixed[node] {
                Some(b) => b,
                None => align(m, forest, node, &cell, &boxes, fixed, hulls[node].as_ref()),
            });
        }
        for &c in members.iter().rev() {
            if !forest.is_leaf(c) {
                queue.push((Some(c), boxes[c].expect("placed above")));
            }
        }
    }
    Ok(boxes.into_iter().map(|b| b.expect("every node placed")).collect())
}

/// Bounding box of the fixed strict descendants of each node.
fn fixed_hulls(forest: &ContainForest, fixed: &[Option<BBox>]) -> Vec<Option<BBox>> {
    let n = fixed.len();
    (0..n)
        .map(|v| {
            (0..n)
                .filter(|&u| forest.is_ancestor(v, u))
                .filter_map(|u| fixed[u])
                .map(|b| (b.left(), b.top(), b.right(), b.bottom()))
                .reduce(|a, b| (a.0.min(b.0), a.1.min(b.1), a.2.max(b.2), a.3.max(b.3)))
                .and_then(|(l, t, r, b)| BBox::from_edges(l, t, r, b).ok())
        })
        .collect()
}

/// Shrinks a free node's cell around a centre that keeps the requested
/// TOP/LEFT order, including ties, against every box already known.
fn align(
    m: &RelationMatrix,
    forest: &ContainForest,
    v: usize,
    cell: &BBox,
    placed: &[Option<BBox>],
    fixed: &[Option<BBox>],
    hull: Option<&BBox>,
) -> BBox {
    let known: Vec<(usize, BBox)> = (0..m.len())
        .filter(|&u| u != v && !forest.related(u, v))
        .filter_map(|u| placed[u].or(fixed[u]).map(|b| (u, b)))
        .collect();
    let axis = |channel: RelationChannel, lo: f64, hi: f64, centre: fn(&BBox) -> f64, inner: Option<(f64, f64)>| {
        let half = MIN_SIZE / 2.0;
        let (mut min, mut max) = (lo + half, hi - half);
        if let Some((a, b)) = inner {
            min = min.max((lo + b) / 2.0);
            max = max.min((hi + a) / 2.0);
        }
        let mut tie = None;
        for &(u, b) in &known {
            let c = centre(&b);
            match (m.get(channel, v, u), m.get(channel, u, v)) {
                (true, false) => max = max.min(c - ALIGN_STEP),
                (false, true) => min = min.max(c + ALIGN_STEP),
                (false, false) => tie = tie.or(Some(c)),
                (true, true) => {}
            }
        }
        let mid = (lo + hi) / 2.0;
        let c = match tie {
            Some(t) if t >= min && t <= max => t,
            _ if min <= max => mid.clamp(min, max),
            _ => mid,
        };
        let r = (c - lo).min(hi - c).max(0.0);
        (c - r, c + r)
    };
    let (x0, x1) = axis(
        RelationChannel::Left,
        cell.left(),
        cell.right(),
        |b| b.x,
        hull.map(|h| (h.left(), h.right())),
    );
    let (y0, y1) = axis(
        RelationChannel::Top,
        cell.top(),
        cell.bottom(),
        |b| b.y,
        hull.map(|h| (h.top(), h.bottom())),
    );
    BBox::from_edges(x0, y0, x1, y1).unwrap_or(*cell)
}

/// Centre separation used for a strict order, a few times the derivation
/// tolerance.
const ALIGN_STEP: f64 = 4.0 * POSITION_EPS;

fn asserted_hold(req: &GenerationRequest, forest: &ContainForest, boxes: &[BBox]) -> bool {
    assemble(req, forest, boxes)
        .map(|g| relation_mismatches(&req.relations, &derive_relations(&g), ConstraintMode::Asserted).is_empty())
        .unwrap_or(false)
}

fn band_error(err: BandError) -> SynthError {
    match err {
        BandError::TooSmall { node } => SynthError::infeasible(
            format!("node {} would be smaller than the minimum size", node + 1),
            Vec::new(),
        ),
        BandError::OutsideParent { node } => SynthError::infeasible(
            format!("fixed node {} does not fit inside its parent", node + 1),
            Vec::new(),
        ),
        BandError::PinClash { a, b } => SynthError::infeasible(
            format!("fixed nodes {} and {} cannot both keep their boxes", a + 1, b + 1),
            Vec::new(),
        ),
    }
}

/// Longest-path layer of each node over `edges`, or the nodes left on or
/// behind a cycle.
fn layers(k: usize, edges: &[(usize, usize)]) -> Result<Vec<usize>, Vec<usize>> {
    let mut indeg = vec![0usize; k];
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); k];
    for &(a, b) in edges {
        out[a].push(b);
        indeg[b] += 1;
    }
    let mut layer = vec![0usize; k];
    let mut ready: Vec<usize> = (0..k).filter(|&v| indeg[v] == 0).collect();
    let mut seen = 0;
    while let Some(v) = ready.pop() {
        seen += 1;
        for &w in &out[v] {
            layer[w] = layer[w].max(layer[v] + 1);
            indeg[w] -= 1;
            if indeg[w] == 0 {
                ready.push(w);
            }
        }
    }
    if seen < k {
        return Err((0..k).filter(|&v| indeg[v] > 0).collect());
    }
    Ok(layer)
}

fn find(uf: &mut [usize], a: usize) -> usize {
    let mut r = a;
    while uf[r] != r {
        r = uf[r];
    }
    let mut cur = a;
    while uf[cur] != r {
        let next = uf[cur];
        uf[cur] = r;
        cur = next;
    }
    r
}

fn place_exact(
    m: &RelationMatrix,
    members: &[usize],
    weights: &[f64],
    fixed: &[Option<BBox>],
    parent: &BBox,
) -> Result<Vec<(usize, BBox)>, SynthError> {
    let top = RelationChannel::Top;
    let left = RelationChannel::Left;
    let k = members.len();
    let mut uf: Vec<usize> = (0..k).collect();
    for a in 0..k {
        for b in a + 1..k {
            let (x, y) = (members[a], members[b]);
            if !m.get(top, x, y) && !m.get(top, y, x) {
                let (ra, rb) = (find(&mut uf, a), find(&mut uf, b));
                uf[ra.max(rb)] = ra.min(rb);
            }
        }
    }
    let class_of: Vec<usize> = (0..k).map(|a| find(&mut uf, a)).collect();
    let class_ids: Vec<usize> = class_of.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let slot: BTreeMap<usize, usize> = class_ids.iter().enumerate().map(|(s, &c)| (c, s)).collect();

    let mut inside = Vec::new();
    let mut edges = Vec::new();
    for a in 0..k {
        for b in 0..k {
            if a != b && m.get(top, members[a], members[b]) {
                if class_of[a] == class_of[b] {
                    inside.push(Violation::at(top, members[a], members[b]));
                } else {
                    edges.push((slot[&class_of[a]], slot[&class_of[b]]));
                }
            }
        }
    }
    if !inside.is_empty() {
        return Err(SynthError::infeasible(
            "nodes that must share a row are ordered vertically",
            inside,
        ));
    }
    let row_layer = layers(class_ids.len(), &edges).map_err(|_| {
        SynthError::infeasible("row order is cyclic", Vec::new())
    })?;

    let mut rows: Vec<(usize, Vec<usize>)> = class_ids
        .iter()
        .enumerate()
        .map(|(s, &c)| {
            let row: Vec<usize> = (0..k).filter(|&a| class_of[a] == c).map(|a| members[a]).collect();
            (row_layer[s], row)
        })
        .collect();
    rows.sort_by_key(|(layer, row)| (*layer, row[0]));

    let mut arranged: Vec<Vec<Member>> = Vec::with_capacity(rows.len());
    for (_, row) in rows {
        let mut col_edges = Vec::new();
        for (a, &x) in row.iter().enumerate() {
            for (b, &y) in row.iter().enumerate() {
                if a != b && m.get(left, x, y) {
                    col_edges.push((a, b));
                }
            }
        }
        let col_layer = layers(row.len(), &col_edges).map_err(|cyc| {
            SynthError::infeasible(
                "column order within a row is cyclic",
                cyc.iter()
                    .flat_map(|&a| cyc.iter().map(move |&b| (a, b)))
                    .filter(|&(a, b)| m.get(left, row[a], row[b]))
                    .map(|(a, b)| Violation::at(left, row[a], row[b]))
                    .collect(),
            )
        })?;
        let mut order: Vec<usize> = (0..row.len()).collect();
        order.sort_by_key(|&a| (col_layer[a], row[a]));
        arranged.push(
            order
                .into_iter()
                .map(|a| Member {
                    node: row[a],
                    weight: weights[row[a]],
                    fixed: fixed[row[a]],
                })
                .collect(),
        );
    }
    layout_rows(parent, &arranged).map_err(band_error)
}

/// One linear inequality over the spans of a single axis.
#[derive(Debug, Clone, Copy)]
enum Span {
    /// `hi[v] - lo[v] >= size`
    Width(usize),
    /// Child strictly inside parent.
    Nest(usize, usize),
    /// Centre of the first before centre of the second.
    Centre(usize, usize),
    /// First span ends before the second starts.
    Apart(usize, usize),
}

struct AxisSystem {
    lo: Vec<f64>,
    hi: Vec<f64>,
    spans: Vec<Span>,
    gap: f64,
    pinned: Option<usize>,
}

impl AxisSystem {
    /// Worst shortfall over all constraints after one projection sweep.
    fn sweep(&mut self) -> f64 {
        let g = self.gap;
        let mut worst: f64 = 0.0;
        for k in 0..self.spans.len() {
            match self.spans[k] {
                Span::Width(v) => {
                    let d = g - (self.hi[v] - self.lo[v]);
                    if d > 0.0 {
                        self.lo[v] -= d / 2.0;
                        self.hi[v] += d / 2.0;
                    }
                    worst = worst.max(d);
                }
                Span::Nest(p, c) => {
                    let d = g - (self.lo[c] - self.lo[p]);
                    if d > 0.0 {
                        self.lo[c] += d / 2.0;
                        self.lo[p] -= d / 2.0;
                    }
                    let e = g - (self.hi[p] - self.hi[c]);
                    if e > 0.0 {
                        self.hi[p] += e / 2.0;
                        self.hi[c] -= e / 2.0;
                    }
                    worst = worst.max(d).max(e);
                }
                Span::Centre(i, j) => {
                    let d = g - (self.lo[j] + self.hi[j] - self.lo[i] - self.hi[i]);
                    if d > 0.0 {
                        self.lo[j] += d / 4.0;
                        self.hi[j] += d / 4.0;
                        self.lo[i] -= d / 4.0;
                        self.hi[i] -= d / 4.0;
                    }
                    worst = worst.max(d);
                }
                Span::Apart(a, b) => {
                    let d = g - (self.lo[b] - self.hi[a]);
                    if d > 0.0 {
                        self.lo[b] += d / 2.0;
                        self.hi[a] -= d / 2.0;
                    }
                    worst = worst.max(d);
                }
            }
        }
        for v in 0..self.lo.len() {
            worst = worst.max(-self.lo[v]).max(self.hi[v] - 1.0);
            self.lo[v] = self.lo[v].max(0.0);
            self.hi[v] = self.hi[v].min(1.0);
        }
        if let Some(r) = self.pinned {
            worst = worst.max(self.lo[r]).max(1.0 - self.hi[r]);
            self.lo[r] = 0.0;
            self.hi[r] = 1.0;
        }
        worst
    }

    /// Cyclic projection onto the constraint half-spaces. Converges whenever
    /// the system is feasible; returns false if it has not after the budget.
    fn solve(&mut self) -> bool {
        for _ in 0..PROJECTION_SWEEPS {
            if self.sweep() <= self.gap * 1e-3 {
                return true;
            }
        }
        false
    }
}

const PROJECTION_SWEEPS: usize = 20_000;

/// Places every node from the set TOP/LEFT entries alone. Children nest
/// strictly in their parents, every sibling pair is kept apart along one axis
/// so the containment forest derives back unchanged, and each set entry
/// orders the two centres. Spans come from cyclic projection.
fn place_projected(m: &RelationMatrix, forest: &ContainForest) -> Result<Vec<BBox>, SynthError> {
    let mut gap = 0.25 / (m.len() as f64 + 1.0);
    loop {
        match place_projected_with(m, forest, gap) {
            Err(SynthError::Infeasible { violations, .. }) if violations.is_empty() && gap > MIN_GAP => gap /= 2.0,
            other => return other,
        }
    }
}

const MIN_GAP: f64 = 1e-3;

fn place_projected_with(m: &RelationMatrix, forest: &ContainForest, gap: f64) -> Result<Vec<BBox>, SynthError> {
    let n = m.len();

    // Which directions each sibling pair is asked to take, per axis.
    let mut wants: BTreeMap<(usize, usize, bool), BTreeSet<bool>> = BTreeMap::new();
    for (c, vertical) in [(RelationChannel::Top, true), (RelationChannel::Left, false)] {
        for (i, j) in m.entries(c) {
            let (pi, pj) = (forest.path_from_root(i), forest.path_from_root(j));
            let split = pi.iter().zip(&pj).take_while(|(a, b)| a == b).count();
            let (a, b) = (pi[split], pj[split]);
            wants.entry((a.min(b), a.max(b), vertical)).or_default().insert(a < b);
        }
    }

    // Centre order per axis over all nodes. Keeping two siblings apart orders
    // every node of one subtree before every node of the other, so a choice
    // is only taken while this order stays acyclic.
    let mut centre: [Vec<(usize, usize)>; 2] = [m.entries(RelationChannel::Left).collect(), m.entries(RelationChannel::Top).collect()];
    let subtree: Vec<Vec<usize>> = (0..n)
        .map(|v| (0..n).filter(|&u| u == v || forest.is_ancestor(v, u)).collect())
        .collect();
    let mut apart: [Vec<(usize, usize)>; 2] = [Vec::new(), Vec::new()];
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    let mut groups: Vec<Vec<usize>> = vec![forest.roots()];
    groups.extend((0..n).map(|p| forest.children(p).to_vec()));
    for members in &groups {
        for (q, &a) in members.iter().enumerate() {
            for &b in &members[q + 1..] {
                pairs.push((a.min(b), a.max(b)));
            }
        }
    }
    pairs.sort_by_key(|&(a, b)| !(wants.contains_key(&(a, b, true)) || wants.contains_key(&(a, b, false))));
    for (a, b) in pairs {
        let mut options: Vec<(bool, bool)> = Vec::new();
        for vertical in [true, false] {
            if let Some(dirs) = wants.get(&(a, b, vertical)) {
                if dirs.len() == 1 {
                    options.push((vertical, *dirs.iter().next().unwrap()));
                }
            }
        }
        for vertical in [true, false] {
            if !wants.contains_key(&(a, b, vertical)) {
                options.extend([(vertical, true), (vertical, false)]);
            }
        }
        let chosen = options.into_iter().find(|&(vertical, forward)| {
            let (x, y) = if forward { (a, b) } else { (b, a) };
            let order = &mut centre[vertical as usize];
            let before = order.len();
            order.extend(subtree[x].iter().flat_map(|&u| subtree[y].iter().map(move |&w| (u, w))));
            if layers(n, order).is_ok() {
                true
            } else {
                order.truncate(before);
                false
            }
        });
        let Some((vertical, forward)) = chosen else {
            return Err(SynthError::infeasible(
                format!("siblings {} and {} cannot be kept apart", a + 1, b + 1),
                blocking_entries(m, &subtree[a], &subtree[b]),
            ));
        };
        apart[vertical as usize].push(if forward { (a, b) } else { (b, a) });
    }

    let roots = forest.roots();
    let depth: Vec<f64> = (0..n).map(|v| forest.depth(v) as f64).collect();
    let mut axes = Vec::with_capacity(2);
    for (c, vertical) in [(RelationChannel::Left, false), (RelationChannel::Top, true)] {
        let mut spans: Vec<Span> = (0..n).map(Span::Width).collect();
        for p in 0..n {
            spans.extend(forest.children(p).iter().map(|&ch| Span::Nest(p, ch)));
        }
        spans.extend(m.entries(c).map(|(i, j)| Span::Centre(i, j)));
        spans.extend(apart[vertical as usize].iter().map(|&(a, b)| Span::Apart(a, b)));
        let mut sys = AxisSystem {
            lo: depth.iter().map(|d| d * gap).collect(),
            hi: depth.iter().map(|d| 1.0 - d * gap).collect(),
            spans,
            gap,
            pinned: (roots.len() == 1).then(|| roots[0]),
        };
        if !sys.solve() {
            return Err(SynthError::infeasible(
                format!("no {} placement satisfies the set entries", c.as_str()),
                Vec::new(),
            ));
        }
        axes.push(sys);
    }
    (0..n)
        .map(|v| {
            BBox::from_edges(axes[0].lo[v], axes[1].lo[v], axes[0].hi[v], axes[1].hi[v])
                .map_err(|e| SynthError::infeasible(format!("node {}: {e}", v + 1), Vec::new()))
        })
        .collect()
}

/// Set entries that order one subtree against the other, on the axis and in
/// the direction that contradicts the fewest of them.
fn blocking_entries(m: &RelationMatrix, x: &[usize], y: &[usize]) -> Vec<Violation> {
    let against = |c: RelationChannel, from: &[usize], to: &[usize]| -> Vec<Violation> {
        from.iter()
            .flat_map(|&u| to.iter().map(move |&w| (u, w)))
            .filter(|&(u, w)| m.get(c, u, w))
            .map(|(u, w)| Violation::at(c, u, w))
            .collect()
    };
    [RelationChannel::Top, RelationChannel::Left]
        .into_iter()
        .flat_map(|c| [against(c, y, x), against(c, x, y)])
        .min_by_key(Vec::len)
        .unwrap_or_default()
}

fn assemble(req: &GenerationRequest, forest: &ContainForest, boxes: &[BBox]) -> Result<LayoutGraph, SynthError> {
    let mut r = rng(req.seed);
    let prior = WeightedIndex::new(LEAF_PRIOR.iter().map(|(_, w)| *w)).expect("positive weights");
    let nodes: Vec<ComponentNode> = boxes
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let id = i as u32 + 1;
            if let Some(node) = req.fixed_nodes.get(&id) {
                return node.clone();
            }
            let category = if let Some(c) = req.known_categories.get(&id) {
                *c
            } else if !forest.is_leaf(i) || (forest.parent(i).is_none() && b.is_full_canvas()) {
                Category::Background
            } else {
                LEAF_PRIOR[prior.sample(&mut r)].0
            };
            ComponentNode::new(id, category, *b)
        })
        .collect();
    LayoutGraph::new(req.canvas, nodes).map_err(|e| SynthError::InvalidRequest(e.to_string()))
}

/// Fills in the masked nodes of `partial` so the layout satisfies `target`.
/// Visible nodes are kept as they are.
pub fn complete(partial: &MaskedGraph, target: &RelationMatrix, seed: u64) -> Result<GenerationResult, SynthError> {
    if target.len() != partial.len() {
        return Err(SynthError::InvalidRequest(format!(
            "target has {} nodes, partial layout has {}",
            target.len(),
            partial.len()
        )));
    }
    let mut req = GenerationRequest::new(target.clone(), partial.canvas).with_seed(seed);
    for slot in &partial.nodes {
        if let NodeSlot::Visible(node) = slot {
            req.free_nodes.remove(&node.node_id);
            req.fixed_nodes.insert(node.node_id, node.clone());
        }
    }
    synthesize(&req)
}

/// Runs the solver, dropping positional assertions it reports as violated
/// and retrying. Returns the result and every entry that was dropped.
pub fn synthesize_relaxed(
    req: &GenerationRequest,
    max_rounds: usize,
) -> Result<(GenerationResult, Vec<Violation>), SynthError> {
    let mut req = req.clone();
    let mut dropped = Vec::new();
    for _ in 0..max_rounds {
        match synthesize(&req) {
            Ok(res) => return Ok((res, dropped)),
            Err(SynthError::Infeasible { violations, reason }) => {
                let positional: Vec<Violation> = violations
                    .into_iter()
                    .filter(|v| {
                        v.channel.is_positional()
                            && req.relations.get(v.channel, v.i as usize - 1, v.j as usize - 1)
                    })
                    .collect();
                if positional.is_empty() {
                    return Err(SynthError::Infeasible {
                        reason,
                        violations: dropped,
                    });
                }
                for v in positional {
                    req.relations.set(v.channel, v.i as usize - 1, v.j as usize - 1, false, false);
                    dropped.push(v);
                }
            }
            Err(e) => return Err(e),
        }
    }
    Err(SynthError::infeasible("relaxation did not converge", dropped))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::synthesize_random_layout;
    use crate::model::Canvas;

    #[test]
    fn forced_vertical_order() {
        let mut m = RelationMatrix::zeros(3);
        m.set(RelationChannel::Contain, 0, 1, true, false);
        m.set(RelationChannel::Contain, 0, 2, true, false);
        m.set(RelationChannel::Parallel, 1, 2, true, false);
        m.set(RelationChannel::Parallel, 2, 1, true, false);
        m.set(RelationChannel::Top, 1, 2, true, false);
        let res = synthesize(&GenerationRequest::new(m.clone(), Canvas::RICO)).unwrap();
        let b = res.layout.bboxes();
        assert!(b[1].y < b[2].y);
        assert!(b[0].encloses(&b[1]) && b[0].encloses(&b[2]));
        assert_eq!(b[1].intersection_area(&b[2]), 0.0);
        assert!(res.relations_out.values_eq(&m));
    }

    #[test]
    fn centres_align_across_rows() {
        // Two rows of two cells each, left column centres tied, plus a wide bar.
        let px = |l: i64, t: i64, r: i64, b: i64| BBox::from_pixel_bounds([l, t, r, b], Canvas::RICO).unwrap();
        let boxes = [
            px(0, 0, 1440, 2560),
            px(80, 400, 680, 1000),
            px(760, 400, 1360, 1000),
            px(80, 1200, 1360, 1400),
            px(80, 1600, 680, 1800),
            px(760, 1600, 1360, 1800),
        ];
        let m = crate::relations::derive_from_boxes(&boxes);
        let res = synthesize(&GenerationRequest::new(m.clone(), Canvas::RICO)).unwrap();
        assert!(res.relations_out.values_eq(&m));

        let mut req = GenerationRequest::new(m.clone(), Canvas::RICO);
        for id in [1u32, 2, 4] {
            let node = ComponentNode::new(id, Category::Image, boxes[id as usize - 1]);
            req.free_nodes.remove(&id);
            req.fixed_nodes.insert(id, node);
        }
        let res = synthesize(&req).unwrap();
        assert!(res.relations_out.values_eq(&m));
        assert_eq!(res.layout.bboxes()[1], boxes[1]);
    }

    #[test]
    fn top_cycle_is_rejected() {
        let mut m = RelationMatrix::zeros(3);
        for (i, j) in [(0, 1), (1, 2), (2, 0)] {
            m.set(RelationChannel::Top, i, j, true, false);
        }
        match synthesize(&GenerationRequest::new(m, Canvas::RICO)) {
            Err(SynthError::Conflicts(c)) => {
                assert_eq!(c[0].kind, crate::relations::ConflictKind::PositionalCycle)
            }
            other => panic!("expected conflicts, got {other:?}"),
        }
    }

    #[test]
    fn derived_matrix_round_trips() {
        for seed in 0..40 {
            let g = synthesize_random_layout(2 + seed as usize % 30, seed).unwrap();
            let m = derive_relations(&g);
            let res = synthesize(&GenerationRequest::new(m.clone(), g.canvas())).unwrap();
            assert!(res.relations_out.values_eq(&m), "seed {seed}");
        }
    }

    #[test]
    fn asserted_mode_honours_set_entries() {
        for seed in 0..40 {
            let g = synthesize_random_layout(2 + seed as usize % 20, seed).unwrap();
            let m = derive_relations(&g);
            let req = GenerationRequest::new(m.clone(), g.canvas()).with_mode(ConstraintMode::Asserted);
            let res = synthesize(&req).unwrap();
            assert!(relation_mismatches(&m, &res.relations_out, ConstraintMode::Asserted).is_empty());
        }
    }

    #[test]
    fn asserted_mode_with_thinned_positions() {
        for seed in 0..80 {
            let g = synthesize_random_layout(4 + seed as usize % 20, seed).unwrap();
            let mut m = derive_relations(&g);
            let mut k = 0;
            for c in [RelationChannel::Top, RelationChannel::Left] {
                for (i, j) in m.entries(c).collect::<Vec<_>>() {
                    k += 1;
                    if k % (2 + seed as usize % 3) == 0 {
                        m.set(c, i, j, false, false);
                    }
                }
            }
            let req = GenerationRequest::new(m.clone(), g.canvas()).with_mode(ConstraintMode::Asserted);
            let res = synthesize(&req).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
            assert!(relation_mismatches(&m, &res.relations_out, ConstraintMode::Asserted).is_empty());
        }
    }

    #[test]
    fn empty_matrix_in_asserted_mode() {
        let req = GenerationRequest::new(RelationMatrix::zeros(9), Canvas::RICO).with_mode(ConstraintMode::Asserted);
        let res = synthesize(&req).unwrap();
        assert_eq!(res.layout.len(), 9);
    }

    #[test]
    fn fixed_child_outside_fixed_parent() {
        let mut m = RelationMatrix::zeros(2);
        m.set(RelationChannel::Contain, 0, 1, true, false);
        let mut req = GenerationRequest::new(m, Canvas::RICO);
        let parent = BBox::from_edges(0.0, 0.0, 0.5, 0.5).unwrap();
        let child = BBox::from_edges(0.6, 0.6, 0.7, 0.7).unwrap();
        req.free_nodes.clear();
        req.fixed_nodes.insert(1, ComponentNode::new(1, Category::Background, parent));
        req.fixed_nodes.insert(2, ComponentNode::new(2, Category::Icon, child));
        match synthesize(&req) {
            Err(SynthError::Infeasible { violations, .. }) => {
                assert_eq!(violations, vec![Violation::at(RelationChannel::Contain, 0, 1)])
            }
            other => panic!("expected infeasible, got {other:?}"),
        }
    }
}
