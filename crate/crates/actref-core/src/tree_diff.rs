//! Tree matching and edit-script generation between two syntax trees.
//!
//! Matching runs in two phases: a greedy top-down pass that pairs isomorphic
//! subtrees by structural hash, and a bottom-up recovery pass that pairs
//! container nodes whose mapped descendants exceed a dice-similarity
//! threshold. The script derived from the mapping uses four action kinds:
//! insert, delete, move and update, with fully-unmapped subtrees collapsed
//! into a single action on their root.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::Config;
use crate::source_model::{AstTree, NodeId, NodeKind};

#[derive(Debug, Error)]
pub enum DiffError {
    #[error("mapping references node {0:?} absent from the tree")]
    MappingMismatch(NodeId),
    #[error("invalid script: {0}")]
    InvalidScript(String),
}

/// Injective, kind-preserving correspondence between before- and after-nodes.
#[derive(Debug, Clone, Default)]
pub struct NodeMapping {
    b2a: HashMap<NodeId, NodeId>,
    a2b: HashMap<NodeId, NodeId>,
}

impl NodeMapping {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, before: NodeId, after: NodeId) {
        debug_assert!(!self.b2a.contains_key(&before));
        debug_assert!(!self.a2b.contains_key(&after));
        self.b2a.insert(before, after);
        self.a2b.insert(after, before);
    }

    pub fn after_of(&self, before: NodeId) -> Option<NodeId> {
        self.b2a.get(&before).copied()
    }

    pub fn before_of(&self, after: NodeId) -> Option<NodeId> {
        self.a2b.get(&after).copied()
    }

    pub fn has_before(&self, before: NodeId) -> bool {
        self.b2a.contains_key(&before)
    }

    pub fn has_after(&self, after: NodeId) -> bool {
        self.a2b.contains_key(&after)
    }

    pub fn len(&self) -> usize {
        self.b2a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b2a.is_empty()
    }

    /// Pairs sorted by before-node id.
    pub fn pairs(&self) -> Vec<(NodeId, NodeId)> {
        let mut v: Vec<_> = self.b2a.iter().map(|(&b, &a)| (b, a)).collect();
        v.sort();
        v
    }
}

/// Reference to the parent a node is attached under, resolvable by
/// [`apply_actions`] without access to the after-tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParentRef {
    /// A mapped node, addressed by its before-tree id.
    Before(NodeId),
    /// An inserted node, addressed by its after-tree id.
    After(NodeId),
}

/// Materializable payload of an inserted subtree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InsertPayload {
    pub kind: NodeKind,
    pub label: String,
    pub children: Vec<InsertPayload>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum EditAction {
    Insert {
        /// After-tree id of the inserted node.
        node: NodeId,
        parent: ParentRef,
        position: usize,
        /// When true the payload covers the whole subtree and descendants
        /// carry no separate actions.
        subtree: bool,
        payload: InsertPayload,
    },
    Delete {
        /// Before-tree id.
        node: NodeId,
        subtree: bool,
    },
    Move {
        /// Before-tree id of the moved node.
        node: NodeId,
        new_parent: ParentRef,
        position: usize,
    },
    Update {
        /// Before-tree id.
        node: NodeId,
        old_label: String,
        new_label: String,
    },
}

impl EditAction {
    pub fn is_insert(&self) -> bool {
        matches!(self, EditAction::Insert { .. })
    }
    pub fn is_delete(&self) -> bool {
        matches!(self, EditAction::Delete { .. })
    }
    pub fn is_move(&self) -> bool {
        matches!(self, EditAction::Move { .. })
    }
    pub fn is_update(&self) -> bool {
        matches!(self, EditAction::Update { .. })
    }
}

/// Digest of a subtree covering kinds, labels and child order; spans and ids
/// are excluded, so relocated but identical subtrees hash equal.
pub fn structural_hash(tree: &AstTree, id: NodeId) -> u128 {
    hash_all(tree)[id.index()]
}

fn hash_all(tree: &AstTree) -> Vec<u128> {
    hash_tree(tree, true)
}

/// Label-agnostic variant: equal digests mean equal kinds and child shape.
fn shape_hash_all(tree: &AstTree) -> Vec<u128> {
    hash_tree(tree, false)
}

fn hash_tree(tree: &AstTree, with_labels: bool) -> Vec<u128> {
    let mut out = vec![0u128; tree.len()];
    // arena order is pre-order, so reverse iteration visits children first
    for idx in (0..tree.len()).rev() {
        let id = NodeId(idx as u32);
        let mut h = Sha256::new();
        h.update([tree.kind(id) as u8]);
        if with_labels {
            let label = tree.label(id);
            h.update((label.len() as u64).to_le_bytes());
            h.update(label.as_bytes());
        }
        for &c in tree.children(id) {
            h.update(out[c.index()].to_le_bytes());
        }
        let digest = h.finalize();
        out[idx] = u128::from_le_bytes(digest[..16].try_into().unwrap());
    }
    out
}

fn subtree_sizes(tree: &AstTree) -> Vec<usize> {
    let mut sizes = vec![1usize; tree.len()];
    for idx in (0..tree.len()).rev() {
        let id = NodeId(idx as u32);
        for &c in tree.children(id) {
            sizes[idx] += sizes[c.index()];
        }
    }
    sizes
}

fn in_subtree(root: NodeId, sizes: &[usize], id: NodeId) -> bool {
    let r = root.index();
    let i = id.index();
    i > r && i < r + sizes[r]
}

/// Dice coefficient over already-mapped descendants of the two nodes.
/// Two leaves compare by label equality.
pub fn dice_similarity(
    before: &AstTree,
    before_node: NodeId,
    after: &AstTree,
    after_node: NodeId,
    mapping: &NodeMapping,
) -> f64 {
    let nb = before.descendant_count(before_node);
    let na = after.descendant_count(after_node);
    if nb == 0 && na == 0 {
        return if before.label(before_node) == after.label(after_node) {
            1.0
        } else {
            0.0
        };
    }
    let sizes_a = subtree_sizes(after);
    let mut pairs = 0usize;
    for d in before.subtree(before_node).into_iter().skip(1) {
        if let Some(img) = mapping.after_of(d) {
            if in_subtree(after_node, &sizes_a, img) {
                pairs += 1;
            }
        }
    }
    2.0 * pairs as f64 / (nb + na) as f64
}

/// Compute the node mapping between two trees.
pub fn match_trees(before: &AstTree, after: &AstTree, cfg: &Config) -> NodeMapping {
    let mut mapping = NodeMapping::new();
    let hb = hash_all(before);
    let ha = hash_all(after);
    let sizes_b = subtree_sizes(before);
    let sizes_a = subtree_sizes(after);
    let heights_b: Vec<usize> = (0..before.len())
        .map(|i| before.height(NodeId(i as u32)))
        .collect();
    let heights_a: Vec<usize> = (0..after.len())
        .map(|i| after.height(NodeId(i as u32)))
        .collect();

    top_down_phase(
        before, after, &hb, &ha, &heights_b, &heights_a, cfg.min_match_height, &mut mapping,
    );
    bottom_up_phase(before, after, &sizes_b, &sizes_a, cfg, &mut mapping);
    mapping
}

fn top_down_phase(
    before: &AstTree,
    after: &AstTree,
    hb: &[u128],
    ha: &[u128],
    heights_b: &[usize],
    heights_a: &[usize],
    min_height: usize,
    mapping: &mut NodeMapping,
) {
    let max_h = heights_b.iter().chain(heights_a.iter()).copied().max().unwrap_or(0);
    let mut h = max_h;
    while h >= min_height.max(1) {
        // bucket unmatched nodes of this height by structural hash
        let mut buckets: BTreeMap<u128, (Vec<NodeId>, Vec<NodeId>)> = BTreeMap::new();
        for i in 0..before.len() {
            let id = NodeId(i as u32);
            if heights_b[i] == h && !mapping.has_before(id) && !covered(before, id, mapping, true) {
                buckets.entry(hb[i]).or_default().0.push(id);
            }
        }
        for i in 0..after.len() {
            let id = NodeId(i as u32);
            if heights_a[i] == h && !mapping.has_after(id) && !covered(after, id, mapping, false) {
                buckets.entry(ha[i]).or_default().1.push(id);
            }
        }
        for (_, (bs, aus)) in buckets {
            if bs.is_empty() || aus.is_empty() {
                continue;
            }
            let mut used = vec![false; aus.len()];
            for b in bs {
                // smallest pre-order distance, then leftmost after-node
                let mut best: Option<(usize, usize)> = None; // (dist, idx)
                for (i, &a) in aus.iter().enumerate() {
                    if used[i] {
                        continue;
                    }
                    let dist = (b.index() as i64 - a.index() as i64).unsigned_abs() as usize;
                    if best.map_or(true, |(bd, _)| dist < bd) {
                        best = Some((dist, i));
                    }
                }
                if let Some((_, i)) = best {
                    used[i] = true;
                    map_isomorphic(before, b, after, aus[i], mapping);
                }
            }
        }
        h -= 1;
    }
}

/// True when the node sits under an ancestor that is already fully matched
/// (its subtree was mapped pairwise), which cannot happen for unmatched
/// nodes; kept as a cheap invariant guard.
fn covered(_tree: &AstTree, _id: NodeId, _mapping: &NodeMapping, _before: bool) -> bool {
    false
}

fn map_isomorphic(
    before: &AstTree,
    b: NodeId,
    after: &AstTree,
    a: NodeId,
    mapping: &mut NodeMapping,
) {
    if mapping.has_before(b) || mapping.has_after(a) {
        return;
    }
    mapping.insert(b, a);
    let bc = before.children(b);
    let ac = after.children(a);
    debug_assert_eq!(bc.len(), ac.len(), "isomorphic subtrees must agree");
    for (&cb, &ca) in bc.iter().zip(ac.iter()) {
        map_isomorphic(before, cb, after, ca, mapping);
    }
}

fn bottom_up_phase(
    before: &AstTree,
    after: &AstTree,
    sizes_b: &[usize],
    sizes_a: &[usize],
    cfg: &Config,
    mapping: &mut NodeMapping,
) {
    let shapes_b = shape_hash_all(before);
    let shapes_a = shape_hash_all(after);
    // post-order over the before tree: children precede parents, which the
    // reversed pre-order arena does not give us, so recurse explicitly
    let mut order = Vec::with_capacity(before.len());
    postorder(before, before.root(), &mut order);
    for b in order {
        if mapping.has_before(b) {
            continue;
        }
        let is_root = b == before.root();
        if before.children(b).is_empty() && !is_root {
            continue;
        }
        let candidates = candidate_containers(before, b, after, sizes_a, mapping);
        let mut best: Option<(f64, usize, NodeId)> = None; // (sim, dist, candidate)
        for a in candidates {
            let sim = dice_similarity(before, b, after, a, mapping);
            let dist = (b.index() as i64 - a.index() as i64).unsigned_abs() as usize;
            let better = match best {
                None => true,
                Some((bs, bd, _)) => sim > bs || (sim == bs && dist < bd),
            };
            if better {
                best = Some((sim, dist, a));
            }
        }
        if let Some((sim, _, a)) = best {
            let threshold = cfg.adaptive_threshold(sizes_b[b.index()], sizes_a[a.index()]);
            if sim >= threshold || is_root {
                mapping.insert(b, a);
                recover_children(before, b, after, a, &shapes_b, &shapes_a, mapping);
            }
        } else if is_root && !mapping.has_after(after.root()) {
            mapping.insert(b, after.root());
            recover_children(before, b, after, after.root(), &shapes_b, &shapes_a, mapping);
        }
    }
}

fn postorder(tree: &AstTree, id: NodeId, out: &mut Vec<NodeId>) {
    for &c in tree.children(id) {
        postorder(tree, c, out);
    }
    out.push(id);
}

/// Unmatched after-nodes of the same kind that share mapped descendants
/// with `b` (for the root: the after root).
fn candidate_containers(
    before: &AstTree,
    b: NodeId,
    after: &AstTree,
    sizes_a: &[usize],
    mapping: &NodeMapping,
) -> Vec<NodeId> {
    let kind = before.kind(b);
    let mut seen = std::collections::BTreeSet::new();
    for d in before.subtree(b).into_iter().skip(1) {
        if let Some(img) = mapping.after_of(d) {
            // walk ancestors of the image
            let mut cur = after.parent(img);
            while let Some(p) = cur {
                if !mapping.has_after(p) && after.kind(p) == kind {
                    seen.insert(p);
                }
                cur = after.parent(p);
            }
        }
    }
    let _ = sizes_a;
    seen.into_iter().collect()
}

/// After two containers match, recursively pair their unmatched children:
/// first those that agree on kind and label, then leftover leaves of the
/// same kind (relabeled identifiers and literals), then leftover containers
/// of the same kind and child shape.
fn recover_children(
    before: &AstTree,
    b: NodeId,
    after: &AstTree,
    a: NodeId,
    shapes_b: &[u128],
    shapes_a: &[u128],
    mapping: &mut NodeMapping,
) {
    let mut groups: BTreeMap<(NodeKind, String), (Vec<NodeId>, Vec<NodeId>)> = BTreeMap::new();
    for &cb in before.children(b) {
        if !mapping.has_before(cb) {
            groups
                .entry((before.kind(cb), before.label(cb).to_string()))
                .or_default()
                .0
                .push(cb);
        }
    }
    for &ca in after.children(a) {
        if !mapping.has_after(ca) {
            groups
                .entry((after.kind(ca), after.label(ca).to_string()))
                .or_default()
                .1
                .push(ca);
        }
    }
    let mut rest: BTreeMap<NodeKind, (Vec<NodeId>, Vec<NodeId>)> = BTreeMap::new();
    for ((kind, _), (bs, aus)) in groups {
        let n = bs.len().min(aus.len());
        for i in 0..n {
            mapping.insert(bs[i], aus[i]);
            recover_children(before, bs[i], after, aus[i], shapes_b, shapes_a, mapping);
        }
        let slot = rest.entry(kind).or_default();
        slot.0.extend(&bs[n..]);
        slot.1.extend(&aus[n..]);
    }
    for (_, (mut bs, mut aus)) in rest {
        bs.sort();
        aus.sort();
        for (cb, ca) in bs.into_iter().zip(aus.into_iter()) {
            let leaf_pair =
                before.children(cb).is_empty() && after.children(ca).is_empty();
            if leaf_pair || shapes_b[cb.index()] == shapes_a[ca.index()] {
                mapping.insert(cb, ca);
                recover_children(before, cb, after, ca, shapes_b, shapes_a, mapping);
            }
        }
    }
}

/// Derive the edit script from a mapping. Script order: updates, moves,
/// inserts, deletes, each in pre-order.
pub fn generate_actions(
    before: &AstTree,
    after: &AstTree,
    mapping: &NodeMapping,
) -> Result<Vec<EditAction>, DiffError> {
    for (b, a) in mapping.pairs() {
        if b.index() >= before.len() {
            return Err(DiffError::MappingMismatch(b));
        }
        if a.index() >= after.len() {
            return Err(DiffError::MappingMismatch(a));
        }
    }

    let mut script = Vec::new();

    // updates: mapped pairs with differing labels, pre-order over before
    for b in before.preorder() {
        if let Some(a) = mapping.after_of(b) {
            if before.label(b) != after.label(a) {
                script.push(EditAction::Update {
                    node: b,
                    old_label: before.label(b).to_string(),
                    new_label: after.label(a).to_string(),
                });
            }
        }
    }

    // moves: parent mapping disagrees, or sibling order changed
    let mut moved: Vec<(NodeId, NodeId)> = Vec::new(); // (before, after)
    for a in after.preorder() {
        let Some(b) = mapping.before_of(a) else { continue };
        let pb = before.parent(b);
        let pa = after.parent(a);
        match (pb, pa) {
            (Some(pb), Some(pa)) => {
                if mapping.after_of(pb) != Some(pa) {
                    moved.push((b, a));
                }
            }
            (None, None) => {}
            _ => moved.push((b, a)),
        }
    }
    let cross_moved: std::collections::HashSet<NodeId> =
        moved.iter().map(|&(b, _)| b).collect();
    // same-parent reorder: keep the longest subsequence stable, move the rest
    for b in before.preorder() {
        let Some(a) = mapping.after_of(b) else { continue };
        let stable_b: Vec<NodeId> = before
            .children(b)
            .iter()
            .copied()
            .filter(|&cb| {
                !cross_moved.contains(&cb)
                    && mapping
                        .after_of(cb)
                        .map_or(false, |ca| after.parent(ca) == Some(a))
            })
            .collect();
        let seq_a: Vec<NodeId> = stable_b
            .iter()
            .map(|&cb| mapping.after_of(cb).unwrap())
            .collect();
        // order of images within the after parent
        let pos_in_a: HashMap<NodeId, usize> = after
            .children(a)
            .iter()
            .enumerate()
            .map(|(i, &c)| (c, i))
            .collect();
        let order: Vec<usize> = seq_a.iter().map(|ca| pos_in_a[ca]).collect();
        let keep = longest_increasing(&order);
        for (i, &cb) in stable_b.iter().enumerate() {
            if !keep.contains(&i) {
                moved.push((cb, mapping.after_of(cb).unwrap()));
            }
        }
    }
    moved.sort_by_key(|&(_, a)| a);
    moved.dedup();
    for (b, a) in &moved {
        let pa = after.parent(*a).expect("moved node has a parent");
        script.push(EditAction::Move {
            node: *b,
            new_parent: parent_ref(pa, mapping),
            position: after.child_index(*a),
        });
    }

    // inserts: pre-order over after, collapsing fully-unmapped subtrees
    let mut stack = vec![after.root()];
    while let Some(a) = stack.pop() {
        if mapping.has_after(a) {
            for &c in after.children(a).iter().rev() {
                stack.push(c);
            }
            continue;
        }
        let whole = after.subtree(a).iter().all(|&n| !mapping.has_after(n));
        let pa = after
            .parent(a)
            .ok_or_else(|| DiffError::InvalidScript("unmapped after root".into()))?;
        script.push(EditAction::Insert {
            node: a,
            parent: parent_ref(pa, mapping),
            position: after.child_index(a),
            subtree: whole,
            payload: payload_of(after, a, whole),
        });
        if !whole {
            for &c in after.children(a).iter().rev() {
                stack.push(c);
            }
        }
    }

    // deletes: pre-order over before, collapsing fully-unmapped subtrees
    let mut stack = vec![before.root()];
    while let Some(b) = stack.pop() {
        if mapping.has_before(b) {
            for &c in before.children(b).iter().rev() {
                stack.push(c);
            }
            continue;
        }
        let whole = before.subtree(b).iter().all(|&n| !mapping.has_before(n));
        script.push(EditAction::Delete { node: b, subtree: whole });
        if !whole {
            for &c in before.children(b).iter().rev() {
                stack.push(c);
            }
        }
    }

    // stable order: updates, moves, inserts, deletes
    script.sort_by_key(|a| match a {
        EditAction::Update { .. } => 0,
        EditAction::Move { .. } => 1,
        EditAction::Insert { .. } => 2,
        EditAction::Delete { .. } => 3,
    });
    Ok(script)
}

fn parent_ref(after_parent: NodeId, mapping: &NodeMapping) -> ParentRef {
    match mapping.before_of(after_parent) {
        Some(b) => ParentRef::Before(b),
        None => ParentRef::After(after_parent),
    }
}

fn payload_of(after: &AstTree, id: NodeId, with_children: bool) -> InsertPayload {
    InsertPayload {
        kind: after.kind(id),
        label: after.label(id).to_string(),
        children: if with_children {
            after
                .children(id)
                .iter()
                .map(|&c| payload_of(after, c, true))
                .collect()
        } else {
            Vec::new()
        },
    }
}

/// Indices of one longest strictly-increasing subsequence.
fn longest_increasing(xs: &[usize]) -> std::collections::HashSet<usize> {
    if xs.is_empty() {
        return Default::default();
    }
    let n = xs.len();
    let mut best_len = vec![1usize; n];
    let mut prev = vec![usize::MAX; n];
    for i in 1..n {
        for j in 0..i {
            if xs[j] < xs[i] && best_len[j] + 1 > best_len[i] {
                best_len[i] = best_len[j] + 1;
                prev[i] = j;
            }
        }
    }
    let mut i = (0..n).max_by_key(|&i| (best_len[i], usize::MAX - i)).unwrap();
    let mut keep = std::collections::HashSet::new();
    loop {
        keep.insert(i);
        if prev[i] == usize::MAX {
            break;
        }
        i = prev[i];
    }
    keep
}

/// Structure-only tree used to check script application results.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlainTree {
    pub kind: NodeKind,
    pub label: String,
    pub children: Vec<PlainTree>,
}

impl PlainTree {
    pub fn of(tree: &AstTree, id: NodeId) -> PlainTree {
        PlainTree {
            kind: tree.kind(id),
            label: tree.label(id).to_string(),
            children: tree.children(id).iter().map(|&c| PlainTree::of(tree, c)).collect(),
        }
    }

    pub fn of_root(tree: &AstTree) -> PlainTree {
        PlainTree::of(tree, tree.root())
    }
}

/// Apply a script generated against `before`, producing a tree isomorphic to
/// the after-tree the script came from. Test oracle for script soundness.
pub fn apply_actions(before: &AstTree, script: &[EditAction]) -> Result<PlainTree, DiffError> {
    #[derive(Debug)]
    struct WNode {
        kind: NodeKind,
        label: String,
        children: Vec<usize>,
        parent: Option<usize>,
        detached: bool,
    }
    let mut nodes: Vec<WNode> = Vec::with_capacity(before.len());
    for id in before.preorder() {
        nodes.push(WNode {
            kind: before.kind(id),
            label: before.label(id).to_string(),
            children: before.children(id).iter().map(|c| c.index()).collect(),
            parent: before.parent(id).map(|p| p.index()),
            detached: false,
        });
    }
    let check = |n: usize, len: usize| -> Result<(), DiffError> {
        if n >= len {
            Err(DiffError::InvalidScript(format!("node {n} out of range")))
        } else {
            Ok(())
        }
    };

    // updates
    for act in script {
        if let EditAction::Update { node, new_label, .. } = act {
            check(node.index(), before.len())?;
            nodes[node.index()].label = new_label.clone();
        }
    }

    // detach moved subtrees
    for act in script {
        if let EditAction::Move { node, .. } = act {
            check(node.index(), before.len())?;
            let i = node.index();
            if let Some(p) = nodes[i].parent {
                nodes[p].children.retain(|&c| c != i);
            }
            nodes[i].parent = None;
            nodes[i].detached = true;
        }
    }

    // deletes, deepest-first so single-node deletes find their children gone
    let mut deletes: Vec<(NodeId, bool)> = script
        .iter()
        .filter_map(|a| match a {
            EditAction::Delete { node, subtree } => Some((*node, *subtree)),
            _ => None,
        })
        .collect();
    deletes.sort_by_key(|&(n, _)| std::cmp::Reverse(n.index()));
    for (node, subtree) in deletes {
        check(node.index(), before.len())?;
        let i = node.index();
        if !subtree && !nodes[i].children.is_empty() {
            return Err(DiffError::InvalidScript(format!(
                "single-node delete of {i} with children still attached"
            )));
        }
        if let Some(p) = nodes[i].parent {
            nodes[p].children.retain(|&c| c != i);
        }
        nodes[i].parent = None;
        nodes[i].detached = true;
    }

    // attach moves and inserts; resolve parents iteratively since an insert
    // may target a node introduced by an earlier insert
    enum Attach<'s> {
        Move(usize, ParentRef, usize),
        Ins(&'s InsertPayload, NodeId, ParentRef, usize, bool),
    }
    let mut pending: Vec<Attach> = Vec::new();
    for act in script {
        match act {
            EditAction::Move { node, new_parent, position } => {
                pending.push(Attach::Move(node.index(), *new_parent, *position));
            }
            EditAction::Insert { node, parent, position, subtree, payload } => {
                pending.push(Attach::Ins(payload, *node, *parent, *position, *subtree));
            }
            _ => {}
        }
    }
    // after-id -> working index for inserted nodes
    let mut after_ids: HashMap<NodeId, usize> = HashMap::new();
    let resolve = |r: &ParentRef, after_ids: &HashMap<NodeId, usize>| -> Option<usize> {
        match r {
            ParentRef::Before(b) => Some(b.index()),
            ParentRef::After(a) => after_ids.get(a).copied(),
        }
    };
    while !pending.is_empty() {
        let mut ready: Vec<(usize, usize, usize)> = Vec::new(); // (pending idx, parent, position)
        for (i, att) in pending.iter().enumerate() {
            let (r, pos) = match att {
                Attach::Move(_, r, pos) => (r, *pos),
                Attach::Ins(_, _, r, pos, _) => (r, *pos),
            };
            if let Some(p) = resolve(r, &after_ids) {
                ready.push((i, p, pos));
            }
        }
        if ready.is_empty() {
            return Err(DiffError::InvalidScript(
                "unresolvable parent reference".into(),
            ));
        }
        // ascending position keeps final child order correct
        ready.sort_by_key(|&(_, p, pos)| (p, pos));
        let ready_set: std::collections::HashSet<usize> =
            ready.iter().map(|&(i, _, _)| i).collect();
        for &(i, p, pos) in &ready {
            match &pending[i] {
                Attach::Move(n, _, _) => {
                    let n = *n;
                    let pos = pos.min(nodes[p].children.len());
                    nodes[p].children.insert(pos, n);
                    nodes[n].parent = Some(p);
                    nodes[n].detached = false;
                }
                Attach::Ins(payload, after_id, _, _, subtree) => {
                    let idx = instantiate(&mut nodes, payload, *subtree);
                    after_ids.insert(*after_id, idx);
                    let pos = pos.min(nodes[p].children.len());
                    nodes[p].children.insert(pos, idx);
                    nodes[idx].parent = Some(p);
                }
            }
        }
        let mut keep = Vec::new();
        for (i, att) in pending.into_iter().enumerate() {
            if !ready_set.contains(&i) {
                keep.push(att);
            }
        }
        pending = keep;

        fn instantiate(
            nodes: &mut Vec<WNode>,
            payload: &InsertPayload,
            with_children: bool,
        ) -> usize {
            let idx = nodes.len();
            nodes.push(WNode {
                kind: payload.kind,
                label: payload.label.clone(),
                children: Vec::new(),
                parent: None,
                detached: false,
            });
            if with_children {
                for c in &payload.children {
                    let ci = instantiate(nodes, c, true);
                    nodes[ci].parent = Some(idx);
                    nodes[idx].children.push(ci);
                }
            }
            idx
        }
    }

    fn build(nodes: &[WNode], i: usize) -> PlainTree {
        PlainTree {
            kind: nodes[i].kind,
            label: nodes[i].label.clone(),
            children: nodes[i].children.iter().map(|&c| build(nodes, c)).collect(),
        }
    }
    Ok(build(&nodes, 0))
}

/// Convenience: match, generate and return the script for two trees.
pub fn diff_trees(before: &AstTree, after: &AstTree, cfg: &Config) -> Vec<EditAction> {
    let mapping = match_trees(before, after, cfg);
    generate_actions(before, after, &mapping).expect("mapping is built from these trees")
}
