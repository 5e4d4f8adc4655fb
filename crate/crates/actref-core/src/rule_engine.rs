//! Declarative matching of refined element actions against the rule
//! templates for the 15 supported refactoring types. Rules run in the order
//! Rename, Move, Extract, Inline; every element action feeds at most one
//! detected instance.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::action_refine::{ElementAction, ElementActionKind};
use crate::config::Config;
use crate::module_level::{token_similarity, tokenize_normalized, TokenBag};
use crate::source_model::{AstTree, ElementKind, NodeId, NodeKind, Span};
use crate::tree_diff::{EditAction, NodeMapping, ParentRef};

/// The closed set of detectable refactoring types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RefactoringType {
    ExtractModule,
    ExtractClass,
    ExtractMethod,
    ExtractVariable,
    InlineModule,
    InlineClass,
    InlineMethod,
    InlineVariable,
    MoveModule,
    MoveClass,
    MoveMethod,
    RenameModule,
    RenameClass,
    RenameMethod,
    RenameVariable,
}

impl RefactoringType {
    pub const ALL: [RefactoringType; 15] = [
        RefactoringType::ExtractModule,
        RefactoringType::ExtractClass,
        RefactoringType::ExtractMethod,
        RefactoringType::ExtractVariable,
        RefactoringType::InlineModule,
        RefactoringType::InlineClass,
        RefactoringType::InlineMethod,
        RefactoringType::InlineVariable,
        RefactoringType::MoveModule,
        RefactoringType::MoveClass,
        RefactoringType::MoveMethod,
        RefactoringType::RenameModule,
        RefactoringType::RenameClass,
        RefactoringType::RenameMethod,
        RefactoringType::RenameVariable,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RefactoringType::ExtractModule => "Extract Module",
            RefactoringType::ExtractClass => "Extract Class",
            RefactoringType::ExtractMethod => "Extract Method",
            RefactoringType::ExtractVariable => "Extract Variable",
            RefactoringType::InlineModule => "Inline Module",
            RefactoringType::InlineClass => "Inline Class",
            RefactoringType::InlineMethod => "Inline Method",
            RefactoringType::InlineVariable => "Inline Variable",
            RefactoringType::MoveModule => "Move Module",
            RefactoringType::MoveClass => "Move Class",
            RefactoringType::MoveMethod => "Move Method",
            RefactoringType::RenameModule => "Rename Module",
            RefactoringType::RenameClass => "Rename Class",
            RefactoringType::RenameMethod => "Rename Method",
            RefactoringType::RenameVariable => "Rename Variable",
        }
    }

    /// The opposite direction of this type, when one exists
    /// (Extract ↔ Inline).
    pub fn mirror(self) -> Option<RefactoringType> {
        Some(match self {
            RefactoringType::ExtractModule => RefactoringType::InlineModule,
            RefactoringType::ExtractClass => RefactoringType::InlineClass,
            RefactoringType::ExtractMethod => RefactoringType::InlineMethod,
            RefactoringType::ExtractVariable => RefactoringType::InlineVariable,
            RefactoringType::InlineModule => RefactoringType::ExtractModule,
            RefactoringType::InlineClass => RefactoringType::ExtractClass,
            RefactoringType::InlineMethod => RefactoringType::ExtractMethod,
            RefactoringType::InlineVariable => RefactoringType::ExtractVariable,
            _ => return None,
        })
    }
}

impl fmt::Display for RefactoringType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownTypeError(pub String);

impl fmt::Display for UnknownTypeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown refactoring type {:?}", self.0)
    }
}

impl std::error::Error for UnknownTypeError {}

impl FromStr for RefactoringType {
    type Err = UnknownTypeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_lowercase().replace(['_', '-'], " ");
        RefactoringType::ALL
            .into_iter()
            .find(|t| t.name().to_lowercase() == norm)
            .ok_or_else(|| UnknownTypeError(s.to_string()))
    }
}

impl Serialize for RefactoringType {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for RefactoringType {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Locator of one element in one file version.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementLocator {
    pub file: String,
    pub qualified_name: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub span: Option<Span>,
}

/// One detected refactoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefactoringInstance {
    #[serde(rename = "type")]
    pub refactoring_type: RefactoringType,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub before: Option<ElementLocator>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub after: Option<ElementLocator>,
    pub description: String,
    #[serde(default)]
    pub evidence: Vec<String>,
    pub commit: String,
}

/// Trees and thresholds the rules consult while matching one file pair.
pub struct RuleCtx<'a> {
    pub before: &'a AstTree,
    pub after: &'a AstTree,
    pub mapping: &'a NodeMapping,
    pub cfg: &'a Config,
    pub commit: &'a str,
}

impl RuleCtx<'_> {
    fn scope_after(&self, scope_b: NodeId) -> NodeId {
        self.mapping.after_of(scope_b).unwrap_or(self.after.root())
    }
}

pub fn classify_action_subject(action: &ElementAction) -> ElementKind {
    action.element.element_kind
}

/// Qualified-name prefix of the element's container (class path without the
/// element's own name), used to compare containers across the two sides of a
/// pair without tripping over file renames.
fn container_prefix(a: &ElementAction) -> &str {
    match a.element.qualified_name.rsplit_once('.') {
        Some((p, _)) => p,
        None => "",
    }
}

/// Index of an unconsumed Insert of the given kind and name inside the same
/// container prefix: evidence that a declaration "rename" is really a
/// content-following mispairing with a new declaration.
fn mismatch_insert(
    actions: &[ElementAction],
    kind: ElementKind,
    prefix: &str,
    name: &str,
) -> Option<usize> {
    (0..actions.len()).find(|&j| {
        !actions[j].consumed
            && actions[j].is_insert()
            && actions[j].element.element_kind == kind
            && container_prefix(&actions[j]) == prefix
            && actions[j].simple_name() == name
    })
}

/// Mirror of [`mismatch_insert`] for deletes.
fn mismatch_delete(
    actions: &[ElementAction],
    kind: ElementKind,
    prefix: &str,
    name: &str,
) -> Option<usize> {
    (0..actions.len()).find(|&j| {
        !actions[j].consumed
            && actions[j].is_delete()
            && actions[j].element.element_kind == kind
            && container_prefix(&actions[j]) == prefix
            && actions[j].simple_name() == name
    })
}

/// Share of `part`'s tokens that also occur in `whole`.
fn containment(part: &TokenBag, whole: &TokenBag) -> f64 {
    let total: usize = part.values().sum();
    if total == 0 {
        return 0.0;
    }
    let mut shared = 0usize;
    for (tok, &n) in part {
        shared += n.min(whole.get(tok).copied().unwrap_or(0));
    }
    shared as f64 / total as f64
}

fn locator(tree_file: &str, qualified_name: &str, span: Option<Span>) -> ElementLocator {
    ElementLocator {
        file: tree_file.to_string(),
        qualified_name: qualified_name.to_string(),
        span,
    }
}

fn element_locator(a: &crate::source_model::CodeElement) -> ElementLocator {
    locator(&a.file, &a.qualified_name, Some(a.span))
}

/// True when some Call under `root` invokes `name` (as a bare name or as an
/// attribute).
fn has_call_to(tree: &AstTree, root: NodeId, name: &str) -> bool {
    for n in tree.subtree(root) {
        if tree.kind(n) != NodeKind::Call {
            continue;
        }
        if let Some(&callee) = tree.children(n).first() {
            match tree.kind(callee) {
                NodeKind::Name | NodeKind::Attribute if tree.label(callee) == name => {
                    return true
                }
                _ => {}
            }
        }
    }
    false
}

/// Tokens of the statement children of a declaration (the body, without the
/// declaration header).
fn stmt_tokens(tree: &AstTree, decl: NodeId) -> TokenBag {
    let mut bag = TokenBag::new();
    for &c in tree.children(decl) {
        if tree.kind(c).is_statement() {
            merge_bag(&mut bag, &tokenize_normalized(tree.text_of(c)));
        }
    }
    bag
}

fn merge_bag(into: &mut TokenBag, from: &TokenBag) {
    for (t, n) in from {
        *into.entry(t.clone()).or_default() += n;
    }
}

fn node_within(tree: &AstTree, root: NodeId, mut n: NodeId) -> bool {
    loop {
        if n == root {
            return true;
        }
        match tree.parent(n) {
            Some(p) => n = p,
            None => return false,
        }
    }
}

fn resolve_parent_after(ctx: &RuleCtx, r: &ParentRef) -> Option<NodeId> {
    match r {
        ParentRef::Before(b) => ctx.mapping.after_of(*b),
        ParentRef::After(a) => Some(*a),
    }
}

/// Does `scope` (in `tree`) directly assign `name`? Nested declarations have
/// their own scopes and do not count.
fn assigns_name(tree: &AstTree, scope: NodeId, name: &str) -> bool {
    tree.subtree(scope).into_iter().any(|n| {
        tree.kind(n) == NodeKind::Name
            && tree.label(n) == name
            && tree.is_assign_target(n)
            && tree.enclosing_declaration(n) == scope
    })
}

fn instance(
    ctx: &RuleCtx,
    t: RefactoringType,
    before: Option<ElementLocator>,
    after: Option<ElementLocator>,
    description: String,
    evidence: Vec<String>,
) -> RefactoringInstance {
    RefactoringInstance {
        refactoring_type: t,
        before,
        after,
        description,
        evidence,
        commit: ctx.commit.to_string(),
    }
}

/// Run all intra-file rules in order over the refined actions.
pub fn apply_rules(ctx: &RuleCtx, actions: &mut Vec<ElementAction>) -> Vec<RefactoringInstance> {
    let mut out = match_rename_rules(ctx, actions);
    out.extend(match_move_rules(ctx, actions));
    out.extend(match_extract_rules(ctx, actions));
    out.extend(match_inline_rules(ctx, actions));
    out
}

pub fn match_rename_rules(
    ctx: &RuleCtx,
    actions: &mut Vec<ElementAction>,
) -> Vec<RefactoringInstance> {
    let mut out = Vec::new();
    for i in 0..actions.len() {
        if actions[i].consumed {
            continue;
        }
        let ElementActionKind::Update { old_name, new_name } = actions[i].kind.clone() else {
            continue;
        };
        match actions[i].element.element_kind {
            ElementKind::Class | ElementKind::Method => {
                let kind = actions[i].element.element_kind;
                let prefix = container_prefix(&actions[i]).to_string();
                // content-following mispairing, not a rename: the old name
                // still exists after (extract-shaped) or the new name already
                // existed before (inline/move-shaped); leave the update for
                // the later rules
                if mismatch_insert(actions, kind, &prefix, &old_name).is_some()
                    || mismatch_delete(actions, kind, &prefix, &new_name).is_some()
                {
                    continue;
                }
                let t = if kind == ElementKind::Class {
                    RefactoringType::RenameClass
                } else {
                    RefactoringType::RenameMethod
                };
                actions[i].consumed = true;
                let before = element_locator(&actions[i].element);
                let after = actions[i]
                    .after_element
                    .as_ref()
                    .map(element_locator)
                    .unwrap_or_else(|| {
                        locator(&ctx.after.path, &rename_qualified(&before.qualified_name, &new_name), None)
                    });
                out.push(instance(
                    ctx,
                    t,
                    Some(before),
                    Some(after),
                    format!("{t} {old_name} -> {new_name}"),
                    vec![format!("declaration name updated {old_name} -> {new_name}")],
                ));
            }
            ElementKind::Variable => {
                let node = actions[i].element.node;
                let scope_b = ctx.before.enclosing_declaration(node);
                let scope_a = ctx.scope_after(scope_b);
                // a real rename leaves no assignment to the old name behind
                // and does not collide with a pre-existing new name
                if assigns_name(ctx.after, scope_a, &old_name)
                    || assigns_name(ctx.before, scope_b, &new_name)
                {
                    continue;
                }
                let mut evidence = Vec::new();
                for j in i..actions.len() {
                    if actions[j].consumed {
                        continue;
                    }
                    let same = matches!(
                        &actions[j].kind,
                        ElementActionKind::Update { old_name: o, new_name: n }
                            if *o == old_name && *n == new_name
                    ) && actions[j].element.element_kind == ElementKind::Variable
                        && ctx.before.enclosing_declaration(actions[j].element.node) == scope_b;
                    if same {
                        actions[j].consumed = true;
                        evidence.push(format!(
                            "occurrence updated at line {}",
                            actions[j].element.span.start.line
                        ));
                    }
                }
                let before = element_locator(&actions[i].element);
                let after = actions[i]
                    .after_element
                    .as_ref()
                    .map(element_locator)
                    .unwrap_or_else(|| {
                        locator(&ctx.after.path, &rename_qualified(&before.qualified_name, &new_name), None)
                    });
                out.push(instance(
                    ctx,
                    RefactoringType::RenameVariable,
                    Some(before),
                    Some(after),
                    format!("Rename Variable {old_name} -> {new_name}"),
                    evidence,
                ));
            }
            _ => {}
        }
    }
    out
}

fn rename_qualified(qualified: &str, new_name: &str) -> String {
    match qualified.rsplit_once('.') {
        Some((prefix, _)) => format!("{prefix}.{new_name}"),
        None => new_name.to_string(),
    }
}

pub fn match_move_rules(
    ctx: &RuleCtx,
    actions: &mut Vec<ElementAction>,
) -> Vec<RefactoringInstance> {
    let mut out = Vec::new();

    // rule 0: a class update old -> new flanked by an insert of old and a
    // delete of new means the matcher cross-paired two surviving classes by
    // content; re-pair them by name and read the stranded members as moves
    for u in 0..actions.len() {
        if actions[u].consumed || actions[u].element.element_kind != ElementKind::Class {
            continue;
        }
        let ElementActionKind::Update { old_name, new_name } = actions[u].kind.clone() else {
            continue;
        };
        let prefix = container_prefix(&actions[u]).to_string();
        let (Some(ins), Some(del)) = (
            mismatch_insert(actions, ElementKind::Class, &prefix, &old_name),
            mismatch_delete(actions, ElementKind::Class, &prefix, &new_name),
        ) else {
            continue;
        };
        let Some(u_after) = actions[u].after_element.as_ref().map(|e| e.node) else {
            continue;
        };
        let old_b = actions[u].element.node; // class named old, before tree
        let ins_a = actions[ins].element.node; // class named old, after tree
        let new_b = actions[del].element.node; // class named new, before tree
        let mut moves = Vec::new();
        // members of old that stayed with the mispaired counterpart now live
        // under the class named new, and vice versa
        for (src, dst, from, to) in [
            (old_b, u_after, &old_name, &new_name),
            (new_b, ins_a, &new_name, &old_name),
        ] {
            for &m in ctx.before.children(src) {
                let mt = match ctx.before.kind(m) {
                    NodeKind::FunctionDef => RefactoringType::MoveMethod,
                    NodeKind::ClassDef => RefactoringType::MoveClass,
                    _ => continue,
                };
                let Some(ma) = ctx.mapping.after_of(m) else { continue };
                if !node_within(ctx.after, dst, ma) {
                    continue;
                }
                let name = ctx.before.label(m).to_string();
                moves.push(instance(
                    ctx,
                    mt,
                    Some(locator(
                        &ctx.before.path,
                        &ctx.before.qualified_name(m),
                        Some(ctx.before.span(m)),
                    )),
                    Some(locator(
                        &ctx.after.path,
                        &ctx.after.qualified_name(ma),
                        Some(ctx.after.span(ma)),
                    )),
                    format!("{mt} {name}: {from} -> {to}"),
                    vec![format!(
                        "declaration kept its body but changed class {from} -> {to}"
                    )],
                ));
            }
        }
        if moves.is_empty() {
            continue;
        }
        actions[u].consumed = true;
        actions[ins].consumed = true;
        actions[del].consumed = true;
        out.extend(moves);
    }

    // containers that are themselves brand-new or fully removed; moves in and
    // out of those belong to the extract/inline rules
    let inserted_containers: Vec<String> = actions
        .iter()
        .filter(|a| a.is_insert() && a.element.element_kind == ElementKind::Class)
        .map(|a| format!("{}::{}", a.element.file, a.element.qualified_name))
        .collect();
    let deleted_containers: Vec<String> = actions
        .iter()
        .filter(|a| a.is_delete() && a.element.element_kind == ElementKind::Class)
        .map(|a| format!("{}::{}", a.element.file, a.element.qualified_name))
        .collect();

    // rule 1: element moves between surviving containers
    for i in 0..actions.len() {
        if actions[i].consumed {
            continue;
        }
        let ElementActionKind::Move {
            from_container,
            to_container,
        } = actions[i].kind.clone()
        else {
            continue;
        };
        let t = match actions[i].element.element_kind {
            ElementKind::Class => RefactoringType::MoveClass,
            ElementKind::Method => RefactoringType::MoveMethod,
            _ => continue,
        };
        if inserted_containers.contains(&to_container)
            || deleted_containers.contains(&from_container)
        {
            continue;
        }
        actions[i].consumed = true;
        let before = element_locator(&actions[i].element);
        let after = actions[i].after_element.as_ref().map(element_locator);
        out.push(instance(
            ctx,
            t,
            Some(before),
            after,
            format!(
                "{t} {}: {} -> {}",
                actions[i].simple_name(),
                from_container,
                to_container
            ),
            vec![format!("declaration moved {from_container} -> {to_container}")],
        ));
    }

    // rule 2: same-name delete/insert pairs across containers
    let mut dels: Vec<usize> = (0..actions.len())
        .filter(|&i| {
            !actions[i].consumed
                && actions[i].is_delete()
                && matches!(
                    actions[i].element.element_kind,
                    ElementKind::Class | ElementKind::Method
                )
        })
        .collect();
    let mut inss: Vec<usize> = (0..actions.len())
        .filter(|&i| {
            !actions[i].consumed
                && actions[i].is_insert()
                && matches!(
                    actions[i].element.element_kind,
                    ElementKind::Class | ElementKind::Method
                )
        })
        .collect();
    dels.sort_by(|&x, &y| {
        (actions[x].simple_name().to_string(), actions[x].element.file.clone())
            .cmp(&(actions[y].simple_name().to_string(), actions[y].element.file.clone()))
    });
    inss.sort_by(|&x, &y| {
        (actions[x].simple_name().to_string(), actions[x].element.file.clone())
            .cmp(&(actions[y].simple_name().to_string(), actions[y].element.file.clone()))
    });
    for d in dels {
        if actions[d].consumed {
            continue;
        }
        for &i in &inss {
            if actions[i].consumed
                || actions[d].element.element_kind != actions[i].element.element_kind
                || actions[d].simple_name() != actions[i].simple_name()
                || actions[d].container() == actions[i].container()
            {
                continue;
            }
            let sim = token_similarity(&actions[d].body_tokens, &actions[i].body_tokens);
            if sim < ctx.cfg.move_floor {
                continue;
            }
            let t = match actions[d].element.element_kind {
                ElementKind::Class => RefactoringType::MoveClass,
                _ => RefactoringType::MoveMethod,
            };
            actions[d].consumed = true;
            actions[i].consumed = true;
            out.push(instance(
                ctx,
                t,
                Some(element_locator(&actions[d].element)),
                Some(element_locator(&actions[i].element)),
                format!(
                    "{t} {}: {} -> {}",
                    actions[d].simple_name(),
                    actions[d].container(),
                    actions[i].container()
                ),
                vec![format!("paired delete/insert, body similarity {sim:.4}")],
            ));
            break;
        }
    }
    out
}

pub fn match_extract_rules(
    ctx: &RuleCtx,
    actions: &mut Vec<ElementAction>,
) -> Vec<RefactoringInstance> {
    let mut out = Vec::new();
    extract_method_rule(ctx, actions, &mut out);
    extract_class_rule(ctx, actions, &mut out);
    extract_variable_rules(ctx, actions, &mut out);
    out
}

fn extract_method_rule(
    ctx: &RuleCtx,
    actions: &mut Vec<ElementAction>,
    out: &mut Vec<RefactoringInstance>,
) {
    for i in 0..actions.len() {
        if actions[i].consumed
            || !actions[i].is_insert()
            || actions[i].element.element_kind != ElementKind::Method
        {
            continue;
        }
        let new_node = actions[i].element.node; // after tree
        let new_name = actions[i].simple_name().to_string();
        let body_toks = stmt_tokens(ctx.after, new_node);
        let mut best: Option<(usize, f64)> = None;
        for m in 0..actions.len() {
            if actions[m].consumed || !actions[m].is_modify() {
                continue;
            }
            let mut removed = TokenBag::new();
            for ev in &actions[m].evidence {
                match ev {
                    EditAction::Delete { node, .. }
                        if ctx.before.kind(*node).is_statement() =>
                    {
                        merge_bag(&mut removed, &tokenize_normalized(ctx.before.text_of(*node)));
                    }
                    EditAction::Move {
                        node, new_parent, ..
                    } => {
                        if let Some(pa) = resolve_parent_after(ctx, new_parent) {
                            if node_within(ctx.after, new_node, pa) {
                                merge_bag(
                                    &mut removed,
                                    &tokenize_normalized(ctx.before.text_of(*node)),
                                );
                            }
                        }
                    }
                    _ => {}
                }
            }
            if removed.is_empty() {
                continue;
            }
            let sim = token_similarity(&body_toks, &removed);
            if sim >= ctx.cfg.extract_floor && best.is_none_or(|(_, bs)| sim > bs) {
                best = Some((m, sim));
            }
        }
        let Some((m, sim)) = best else { continue };
        // the source must now call the new method
        let src_after = ctx.scope_after(actions[m].element.node);
        if !has_call_to(ctx.after, src_after, &new_name) {
            continue;
        }
        actions[i].consumed = true;
        actions[m].consumed = true;
        out.push(instance(
            ctx,
            RefactoringType::ExtractMethod,
            Some(element_locator(&actions[m].element)),
            Some(element_locator(&actions[i].element)),
            format!(
                "Extract Method {} from {}",
                new_name, actions[m].element.qualified_name
            ),
            vec![
                format!("body similarity to removed statements {sim:.4}"),
                format!("call to {new_name} inserted at origin"),
            ],
        ));
    }

    // route 2: the matcher followed the extracted body and read the source
    // method as renamed to the new one, reinserting the source under its old
    // name; the update plus the same-name insert are one extraction
    for u in 0..actions.len() {
        if actions[u].consumed || actions[u].element.element_kind != ElementKind::Method {
            continue;
        }
        let ElementActionKind::Update { old_name, new_name } = actions[u].kind.clone() else {
            continue;
        };
        let prefix = container_prefix(&actions[u]).to_string();
        let Some(ins) = mismatch_insert(actions, ElementKind::Method, &prefix, &old_name) else {
            continue;
        };
        let Some(u_after) = actions[u].after_element.clone() else { continue };
        // the surviving source (the insert of old) must call the new method,
        // whose body must come from the old one
        if !has_call_to(ctx.after, actions[ins].element.node, &new_name) {
            continue;
        }
        let new_body = stmt_tokens(ctx.after, u_after.node);
        let old_body = stmt_tokens(ctx.before, actions[u].element.node);
        if containment(&new_body, &old_body) < ctx.cfg.extract_floor {
            continue;
        }
        actions[u].consumed = true;
        actions[ins].consumed = true;
        out.push(instance(
            ctx,
            RefactoringType::ExtractMethod,
            Some(element_locator(&actions[u].element)),
            Some(element_locator(&u_after)),
            format!("Extract Method {new_name} from {}", actions[u].element.qualified_name),
            vec![
                format!("body of {new_name} lifted out of {old_name}"),
                format!("call to {new_name} inserted at origin"),
            ],
        ));
    }
}

fn extract_class_rule(
    ctx: &RuleCtx,
    actions: &mut Vec<ElementAction>,
    out: &mut Vec<RefactoringInstance>,
) {
    for i in 0..actions.len() {
        if actions[i].consumed
            || !actions[i].is_insert()
            || actions[i].element.element_kind != ElementKind::Class
        {
            continue;
        }
        let c_node = actions[i].element.node; // after tree
        let c_container = format!(
            "{}::{}",
            actions[i].element.file, actions[i].element.qualified_name
        );
        let mut members: Vec<usize> = Vec::new();
        let mut source: Option<ElementLocator> = None;
        for j in 0..actions.len() {
            if actions[j].consumed || j == i {
                continue;
            }
            match &actions[j].kind {
                ElementActionKind::Move { to_container, .. }
                    if actions[j].element.element_kind == ElementKind::Method
                        && *to_container == c_container =>
                {
                    members.push(j);
                    source.get_or_insert_with(|| container_locator(ctx, &actions[j]));
                }
                ElementActionKind::Delete
                    if actions[j].element.element_kind == ElementKind::Method =>
                {
                    let d_body = stmt_tokens(ctx.before, actions[j].element.node);
                    let absorbed = ctx.after.subtree(c_node).into_iter().any(|n| {
                        ctx.after.kind(n) == NodeKind::FunctionDef
                            && token_similarity(&d_body, &stmt_tokens(ctx.after, n))
                                >= ctx.cfg.extract_floor
                    });
                    if absorbed {
                        members.push(j);
                        source.get_or_insert_with(|| container_locator(ctx, &actions[j]));
                    }
                }
                _ => {}
            }
        }
        if members.is_empty() {
            continue;
        }
        actions[i].consumed = true;
        for &j in &members {
            actions[j].consumed = true;
        }
        out.push(instance(
            ctx,
            RefactoringType::ExtractClass,
            source,
            Some(element_locator(&actions[i].element)),
            format!(
                "Extract Class {} ({} member(s) received)",
                actions[i].element.qualified_name,
                members.len()
            ),
            vec![format!("{} members moved into the new class", members.len())],
        ));
    }

    // route 2: the matcher followed the extracted members and read the source
    // class as renamed to the new one, reinserting the source under its old
    // name; the update plus the same-name insert are one extraction
    for u in 0..actions.len() {
        if actions[u].consumed || actions[u].element.element_kind != ElementKind::Class {
            continue;
        }
        let ElementActionKind::Update { old_name, new_name } = actions[u].kind.clone() else {
            continue;
        };
        let prefix = container_prefix(&actions[u]).to_string();
        let Some(ins) = mismatch_insert(actions, ElementKind::Class, &prefix, &old_name) else {
            continue;
        };
        let Some(u_after) = actions[u].after_element.clone() else { continue };
        // at least one member of the source must have stayed with the new
        // class through the mapping
        let carried = ctx
            .before
            .children(actions[u].element.node)
            .iter()
            .filter(|&&m| {
                matches!(ctx.before.kind(m), NodeKind::FunctionDef | NodeKind::ClassDef)
            })
            .filter_map(|&m| ctx.mapping.after_of(m))
            .filter(|&ma| node_within(ctx.after, u_after.node, ma))
            .count();
        if carried == 0 {
            continue;
        }
        actions[u].consumed = true;
        actions[ins].consumed = true;
        out.push(instance(
            ctx,
            RefactoringType::ExtractClass,
            Some(element_locator(&actions[u].element)),
            Some(element_locator(&u_after)),
            format!("Extract Class {new_name} from {old_name}"),
            vec![format!("{carried} member(s) carried over from {old_name}")],
        ));
    }
}

/// Locator of the container (class or module) holding an action's element on
/// the before side.
fn container_locator(ctx: &RuleCtx, action: &ElementAction) -> ElementLocator {
    let parent = ctx.before.enclosing_declaration(action.element.node);
    let qn = ctx.before.qualified_name(parent);
    let qn = if qn.is_empty() {
        module_name(&ctx.before.path)
    } else {
        qn
    };
    locator(&action.element.file, &qn, Some(ctx.before.span(parent)))
}

fn module_name(path: &str) -> String {
    let name = path.rsplit('/').next().unwrap_or(path);
    name.strip_suffix(".py").unwrap_or(name).to_string()
}

fn extract_variable_rules(
    ctx: &RuleCtx,
    actions: &mut Vec<ElementAction>,
    out: &mut Vec<RefactoringInstance>,
) {
    // route 1: a surviving assignment was retargeted to the new variable and
    // the original statement was rebuilt around it
    for i in 0..actions.len() {
        if actions[i].consumed || actions[i].element.element_kind != ElementKind::Variable {
            continue;
        }
        let ElementActionKind::Update { old_name, new_name } = actions[i].kind.clone() else {
            continue;
        };
        let node = actions[i].element.node;
        let scope_b = ctx.before.enclosing_declaration(node);
        let scope_a = ctx.scope_after(scope_b);
        let rebuilt = ctx.after.subtree(scope_a).into_iter().any(|n| {
            ctx.after.kind(n) == NodeKind::Assign
                && !ctx.mapping.has_after(n)
                && ctx.after.enclosing_declaration(n) == scope_a
                && assign_targets(ctx.after, n).contains(&old_name.as_str())
                && ctx
                    .after
                    .subtree(n)
                    .into_iter()
                    .any(|u| ctx.after.kind(u) == NodeKind::Name && ctx.after.label(u) == new_name)
        });
        if !rebuilt {
            continue;
        }
        actions[i].consumed = true;
        let before = element_locator(&actions[i].element);
        let after = actions[i]
            .after_element
            .as_ref()
            .map(element_locator)
            .unwrap_or_else(|| {
                locator(&ctx.after.path, &rename_qualified(&before.qualified_name, &new_name), None)
            });
        out.push(instance(
            ctx,
            RefactoringType::ExtractVariable,
            Some(before),
            Some(after),
            format!("Extract Variable {new_name}"),
            vec![format!(
                "assignment to {new_name} introduced; {old_name} rebuilt from it"
            )],
        ));
    }

    // route 2: wholly new assignment whose right-hand side matches a removed
    // expression, with the new name used at the old position
    for m in 0..actions.len() {
        if actions[m].consumed || !actions[m].is_modify() {
            continue;
        }
        let evidence = actions[m].evidence.clone();
        let mut matched = false;
        for ev in &evidence {
            let EditAction::Insert { node: assign_a, .. } = ev else { continue };
            if ctx.after.kind(*assign_a) != NodeKind::Assign {
                continue;
            }
            let targets = assign_targets(ctx.after, *assign_a);
            let [var] = targets.as_slice() else { continue };
            let var = var.to_string();
            let Some(&rhs) = ctx.after.children(*assign_a).last() else { continue };
            let rhs_toks = tokenize_normalized(ctx.after.text_of(rhs));
            let scope_a = ctx.after.enclosing_declaration(*assign_a);
            let similar_removed = evidence.iter().any(|ev2| {
                matches!(ev2, EditAction::Delete { node, .. }
                    if ctx.before.kind(*node).is_expression()
                        && token_similarity(
                            &rhs_toks,
                            &tokenize_normalized(ctx.before.text_of(*node)),
                        ) >= ctx.cfg.extract_floor)
            });
            if !similar_removed {
                continue;
            }
            let used_elsewhere = ctx.after.subtree(scope_a).into_iter().any(|n| {
                ctx.after.kind(n) == NodeKind::Name
                    && ctx.after.label(n) == var
                    && !ctx.mapping.has_after(n)
                    && !node_within(ctx.after, *assign_a, n)
            });
            if !used_elsewhere {
                continue;
            }
            let scope_qn = ctx.after.qualified_name(scope_a);
            let qn = if scope_qn.is_empty() {
                var.clone()
            } else {
                format!("{scope_qn}.{var}")
            };
            out.push(instance(
                ctx,
                RefactoringType::ExtractVariable,
                None,
                Some(locator(&ctx.after.path, &qn, Some(ctx.after.span(*assign_a)))),
                format!("Extract Variable {var}"),
                vec![format!(
                    "new assignment to {var} matches a removed expression"
                )],
            ));
            matched = true;
            break;
        }
        if matched {
            actions[m].consumed = true;
        }
    }
}

/// Labels of the direct Name targets of an assignment.
fn assign_targets<'t>(tree: &'t AstTree, assign: NodeId) -> Vec<&'t str> {
    let kids = tree.children(assign);
    let mut out = Vec::new();
    if kids.len() < 2 {
        return out;
    }
    for &t in &kids[..kids.len() - 1] {
        if tree.kind(t) == NodeKind::Name {
            out.push(tree.label(t));
        }
    }
    out
}

pub fn match_inline_rules(
    ctx: &RuleCtx,
    actions: &mut Vec<ElementAction>,
) -> Vec<RefactoringInstance> {
    let mut out = Vec::new();
    inline_method_rule(ctx, actions, &mut out);
    inline_class_rule(ctx, actions, &mut out);
    inline_variable_rules(ctx, actions, &mut out);
    out
}

fn inline_method_rule(
    ctx: &RuleCtx,
    actions: &mut Vec<ElementAction>,
    out: &mut Vec<RefactoringInstance>,
) {
    for d in 0..actions.len() {
        if actions[d].consumed
            || !actions[d].is_delete()
            || actions[d].element.element_kind != ElementKind::Method
        {
            continue;
        }
        let d_node = actions[d].element.node; // before tree
        let name = actions[d].simple_name().to_string();
        let d_body = stmt_tokens(ctx.before, d_node);
        // moves out of the deleted method live on its own Modify action
        let d_modify = (0..actions.len()).find(|&m| {
            actions[m].is_modify() && actions[m].element.node == d_node && !actions[m].consumed
        });
        let mut best: Option<(usize, f64)> = None;
        for t in 0..actions.len() {
            if actions[t].consumed || !actions[t].is_modify() || Some(t) == d_modify {
                continue;
            }
            let t_after = ctx.scope_after(actions[t].element.node);
            let mut inserted = TokenBag::new();
            for ev in &actions[t].evidence {
                if let EditAction::Insert { node, .. } = ev {
                    if ctx.after.kind(*node).is_statement() {
                        merge_bag(&mut inserted, &tokenize_normalized(ctx.after.text_of(*node)));
                    }
                }
            }
            if let Some(dm) = d_modify {
                for ev in &actions[dm].evidence {
                    if let EditAction::Move {
                        node, new_parent, ..
                    } = ev
                    {
                        if let Some(pa) = resolve_parent_after(ctx, new_parent) {
                            if node_within(ctx.after, t_after, pa) {
                                merge_bag(
                                    &mut inserted,
                                    &tokenize_normalized(ctx.before.text_of(*node)),
                                );
                            }
                        }
                    }
                }
            }
            if inserted.is_empty() {
                continue;
            }
            let sim = token_similarity(&d_body, &inserted);
            if sim < ctx.cfg.extract_floor {
                continue;
            }
            // the caller's call site must be gone
            let calls_before = has_call_to(ctx.before, actions[t].element.node, &name);
            let calls_after = has_call_to(ctx.after, t_after, &name);
            if calls_before && !calls_after && best.is_none_or(|(_, bs)| sim > bs) {
                best = Some((t, sim));
            }
        }
        let Some((t, sim)) = best else { continue };
        actions[d].consumed = true;
        actions[t].consumed = true;
        if let Some(dm) = d_modify {
            actions[dm].consumed = true;
        }
        let t_after = ctx.scope_after(actions[t].element.node);
        out.push(instance(
            ctx,
            RefactoringType::InlineMethod,
            Some(element_locator(&actions[d].element)),
            Some(locator(
                &ctx.after.path,
                &ctx.after.qualified_name(t_after),
                Some(ctx.after.span(t_after)),
            )),
            format!(
                "Inline Method {} into {}",
                name, actions[t].element.qualified_name
            ),
            vec![
                format!("deleted body similarity to inserted statements {sim:.4}"),
                format!("call to {name} removed from caller"),
            ],
        ));
    }

    // route 2: the matcher followed the inlined body and read the absorbed
    // method as renamed to its caller, deleting the caller's old declaration;
    // the update plus the same-name delete are one inlining
    for u in 0..actions.len() {
        if actions[u].consumed || actions[u].element.element_kind != ElementKind::Method {
            continue;
        }
        let ElementActionKind::Update { old_name, new_name } = actions[u].kind.clone() else {
            continue;
        };
        let prefix = container_prefix(&actions[u]).to_string();
        let Some(del) = mismatch_delete(actions, ElementKind::Method, &prefix, &new_name) else {
            continue;
        };
        let Some(u_after) = actions[u].after_element.clone() else { continue };
        // the old caller body called the absorbed method; the merged body
        // no longer does and now contains it
        if !has_call_to(ctx.before, actions[del].element.node, &old_name)
            || has_call_to(ctx.after, u_after.node, &old_name)
        {
            continue;
        }
        let old_body = stmt_tokens(ctx.before, actions[u].element.node);
        let merged = stmt_tokens(ctx.after, u_after.node);
        if containment(&old_body, &merged) < ctx.cfg.extract_floor {
            continue;
        }
        actions[u].consumed = true;
        actions[del].consumed = true;
        out.push(instance(
            ctx,
            RefactoringType::InlineMethod,
            Some(element_locator(&actions[u].element)),
            Some(element_locator(&u_after)),
            format!("Inline Method {old_name} into {new_name}"),
            vec![
                format!("body of {old_name} absorbed into {new_name}"),
                format!("call to {old_name} removed from caller"),
            ],
        ));
    }
}

fn inline_class_rule(
    ctx: &RuleCtx,
    actions: &mut Vec<ElementAction>,
    out: &mut Vec<RefactoringInstance>,
) {
    for d in 0..actions.len() {
        if actions[d].consumed
            || !actions[d].is_delete()
            || actions[d].element.element_kind != ElementKind::Class
        {
            continue;
        }
        let c_node = actions[d].element.node; // before tree
        let c_container = format!(
            "{}::{}",
            actions[d].element.file, actions[d].element.qualified_name
        );
        let mut members: Vec<usize> = Vec::new();
        let mut target: Option<ElementLocator> = None;
        for j in 0..actions.len() {
            if actions[j].consumed || j == d {
                continue;
            }
            match &actions[j].kind {
                ElementActionKind::Move { from_container, to_container }
                    if actions[j].element.element_kind == ElementKind::Method
                        && *from_container == c_container =>
                {
                    members.push(j);
                    let to = to_container.clone();
                    target.get_or_insert_with(|| locator_from_container(&to));
                }
                ElementActionKind::Insert
                    if actions[j].element.element_kind == ElementKind::Method =>
                {
                    let i_body = stmt_tokens(ctx.after, actions[j].element.node);
                    let from_c = ctx.before.subtree(c_node).into_iter().any(|n| {
                        ctx.before.kind(n) == NodeKind::FunctionDef
                            && token_similarity(&i_body, &stmt_tokens(ctx.before, n))
                                >= ctx.cfg.extract_floor
                    });
                    if from_c {
                        members.push(j);
                        let file = actions[j].element.file.clone();
                        let qn = parent_qualified(&actions[j].element.qualified_name)
                            .unwrap_or_else(|| module_name(&file));
                        target.get_or_insert_with(|| locator(&file, &qn, None));
                    }
                }
                _ => {}
            }
        }
        if members.is_empty() {
            continue;
        }
        actions[d].consumed = true;
        for &j in &members {
            actions[j].consumed = true;
        }
        out.push(instance(
            ctx,
            RefactoringType::InlineClass,
            Some(element_locator(&actions[d].element)),
            target,
            format!(
                "Inline Class {} ({} member(s) absorbed)",
                actions[d].element.qualified_name,
                members.len()
            ),
            vec![format!("{} members moved out of the deleted class", members.len())],
        ));
    }

    // route 2: the matcher followed the absorbed members and read the source
    // class as renamed to the absorbing one, deleting the absorber's old
    // declaration; the update plus the same-name delete are one inlining
    for u in 0..actions.len() {
        if actions[u].consumed || actions[u].element.element_kind != ElementKind::Class {
            continue;
        }
        let ElementActionKind::Update { old_name, new_name } = actions[u].kind.clone() else {
            continue;
        };
        let prefix = container_prefix(&actions[u]).to_string();
        let Some(del) = mismatch_delete(actions, ElementKind::Class, &prefix, &new_name) else {
            continue;
        };
        let Some(u_after) = actions[u].after_element.clone() else { continue };
        // members of the old absorber must now live in the merged class
        let absorbed = ctx
            .before
            .children(actions[del].element.node)
            .iter()
            .filter(|&&m| {
                matches!(ctx.before.kind(m), NodeKind::FunctionDef | NodeKind::ClassDef)
            })
            .filter_map(|&m| ctx.mapping.after_of(m))
            .filter(|&ma| node_within(ctx.after, u_after.node, ma))
            .count();
        if absorbed == 0 {
            continue;
        }
        actions[u].consumed = true;
        actions[del].consumed = true;
        out.push(instance(
            ctx,
            RefactoringType::InlineClass,
            Some(element_locator(&actions[u].element)),
            Some(element_locator(&u_after)),
            format!("Inline Class {old_name} into {new_name}"),
            vec![format!("{absorbed} member(s) of {new_name} joined the merged class")],
        ));
    }
}

fn parent_qualified(qualified: &str) -> Option<String> {
    qualified.rsplit_once('.').map(|(p, _)| p.to_string())
}

fn locator_from_container(container: &str) -> ElementLocator {
    match container.split_once("::") {
        Some((file, qn)) => {
            let qn = if qn.is_empty() { module_name(file) } else { qn.to_string() };
            locator(file, &qn, None)
        }
        None => locator(container, "", None),
    }
}

fn inline_variable_rules(
    ctx: &RuleCtx,
    actions: &mut Vec<ElementAction>,
    out: &mut Vec<RefactoringInstance>,
) {
    // route 1: mirror of the retargeted-assignment extract route
    for i in 0..actions.len() {
        if actions[i].consumed || actions[i].element.element_kind != ElementKind::Variable {
            continue;
        }
        let ElementActionKind::Update { old_name, new_name } = actions[i].kind.clone() else {
            continue;
        };
        let node = actions[i].element.node;
        let scope_b = ctx.before.enclosing_declaration(node);
        let absorbed = ctx.before.subtree(scope_b).into_iter().any(|n| {
            ctx.before.kind(n) == NodeKind::Assign
                && !ctx.mapping.has_before(n)
                && ctx.before.enclosing_declaration(n) == scope_b
                && assign_targets(ctx.before, n).contains(&new_name.as_str())
                && ctx
                    .before
                    .subtree(n)
                    .into_iter()
                    .any(|u| ctx.before.kind(u) == NodeKind::Name && ctx.before.label(u) == old_name)
        });
        if !absorbed {
            continue;
        }
        actions[i].consumed = true;
        let before = element_locator(&actions[i].element);
        let after = actions[i]
            .after_element
            .as_ref()
            .map(element_locator)
            .unwrap_or_else(|| {
                locator(&ctx.after.path, &rename_qualified(&before.qualified_name, &new_name), None)
            });
        out.push(instance(
            ctx,
            RefactoringType::InlineVariable,
            Some(before),
            Some(after),
            format!("Inline Variable {old_name}"),
            vec![format!(
                "definition of {old_name} merged into the statement defining {new_name}"
            )],
        ));
    }

    // route 2: deleted assignment whose right-hand side reappears where the
    // variable used to be read
    for m in 0..actions.len() {
        if actions[m].consumed || !actions[m].is_modify() {
            continue;
        }
        let evidence = actions[m].evidence.clone();
        let mut matched = false;
        for ev in &evidence {
            let EditAction::Delete { node: assign_b, .. } = ev else { continue };
            if ctx.before.kind(*assign_b) != NodeKind::Assign {
                continue;
            }
            let targets = assign_targets(ctx.before, *assign_b);
            let [var] = targets.as_slice() else { continue };
            let var = var.to_string();
            let Some(&rhs) = ctx.before.children(*assign_b).last() else { continue };
            let rhs_toks = tokenize_normalized(ctx.before.text_of(rhs));
            let scope_b = ctx.before.enclosing_declaration(*assign_b);
            let reappears = evidence.iter().any(|ev2| {
                matches!(ev2, EditAction::Insert { node, .. }
                    if ctx.after.kind(*node).is_expression()
                        && token_similarity(
                            &rhs_toks,
                            &tokenize_normalized(ctx.after.text_of(*node)),
                        ) >= ctx.cfg.extract_floor)
            });
            if !reappears {
                continue;
            }
            let was_used = ctx.before.subtree(scope_b).into_iter().any(|n| {
                ctx.before.kind(n) == NodeKind::Name
                    && ctx.before.label(n) == var
                    && !ctx.mapping.has_before(n)
                    && !node_within(ctx.before, *assign_b, n)
            });
            if !was_used {
                continue;
            }
            let scope_qn = ctx.before.qualified_name(scope_b);
            let qn = if scope_qn.is_empty() {
                var.clone()
            } else {
                format!("{scope_qn}.{var}")
            };
            out.push(instance(
                ctx,
                RefactoringType::InlineVariable,
                Some(locator(&ctx.before.path, &qn, Some(ctx.before.span(*assign_b)))),
                None,
                format!("Inline Variable {var}"),
                vec![format!(
                    "assignment to {var} deleted; its expression reappears inline"
                )],
            ));
            matched = true;
            break;
        }
        if matched {
            actions[m].consumed = true;
        }
    }
}
