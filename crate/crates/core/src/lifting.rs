//! Lifted goal schemas.
//!
//! The goal-dependency graph links goal atoms that share an object. Every
//! connected vertex-induced subgraph of a component is a candidate subgoal;
//! picking at most one per component and replacing objects by variables
//! (all pairwise distinct) gives a lifted schema. Schemas are deduplicated
//! up to variable renaming and ordered largest first.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand::RngCore;
use smallvec::SmallVec;
use thiserror::Error;

use crate::planning::{Atom, AtomSet, Domain, ObjectId, PredicateId, State};

pub const DEFAULT_COMPONENT_CAP: usize = 12;
pub const DEFAULT_SCHEMA_CAP: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LiftError {
    #[error("goal is empty")]
    EmptyGoal,
    #[error("goal component with {size} atoms exceeds the enumeration cap of {cap}")]
    ComponentTooLarge { size: usize, cap: usize },
    #[error("more than {cap} subgoals")]
    TooManySubgoals { cap: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DependencyGraph {
    pub vertices: Vec<Atom>,
    /// Pairs `(i, j)` with `i < j`.
    pub edges: BTreeSet<(usize, usize)>,
}

impl DependencyGraph {
    pub fn neighbours(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().filter_map(move |&(i, j)| {
            if i == v {
                Some(j)
            } else if j == v {
                Some(i)
            } else {
                None
            }
        })
    }

    /// Connected components as sorted vertex lists, ordered by first vertex.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.vertices.len();
        let mut label = vec![usize::MAX; n];
        let mut components = Vec::new();
        for start in 0..n {
            if label[start] != usize::MAX {
                continue;
            }
            let id = components.len();
            let mut members = vec![start];
            label[start] = id;
            let mut frontier = vec![start];
            while let Some(v) = frontier.pop() {
                for u in self.neighbours(v) {
                    if label[u] == usize::MAX {
                        label[u] = id;
                        members.push(u);
                        frontier.push(u);
                    }
                }
            }
            members.sort_unstable();
            components.push(members);
        }
        components
    }
}

pub fn build_dependency_graph(goal: &AtomSet) -> Result<DependencyGraph, LiftError> {
    if goal.is_empty() {
        return Err(LiftError::EmptyGoal);
    }
    let vertices: Vec<Atom> = goal.iter().cloned().collect();
    let mut edges = BTreeSet::new();
    for i in 0..vertices.len() {
        for j in i + 1..vertices.len() {
            if vertices[i].args.iter().any(|o| vertices[j].args.contains(o)) {
                edges.insert((i, j));
            }
        }
    }
    Ok(DependencyGraph { vertices, edges })
}

pub type Var = u32;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LiftedAtom {
    pub predicate: PredicateId,
    pub args: SmallVec<[Var; 3]>,
}

/// Variable atoms plus inequality constraints. Variables are `0..variables`
/// and each occurs in at least one atom.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LiftedGoal {
    pub atoms: Vec<LiftedAtom>,
    pub variables: usize,
    /// Pairs `(x, y)` with `x < y` that must be bound to different objects.
    pub constraints: Vec<(Var, Var)>,
    /// Number of goal-dependency components the schema was built from.
    pub components: usize,
}

impl LiftedGoal {
    /// Lifts ground atoms: objects become variables, every pair of variables
    /// gets an inequality constraint.
    pub fn lift(atoms: &[Atom], components: usize) -> Self {
        let mut vars: BTreeMap<ObjectId, Var> = BTreeMap::new();
        let mut next = 0;
        let lifted: Vec<LiftedAtom> = atoms
            .iter()
            .map(|a| LiftedAtom {
                predicate: a.predicate,
                args: a
                    .args
                    .iter()
                    .map(|o| {
                        *vars.entry(*o).or_insert_with(|| {
                            next += 1;
                            next - 1
                        })
                    })
                    .collect(),
            })
            .collect();
        Self::with_all_distinct(lifted, vars.len(), components)
    }

    fn with_all_distinct(atoms: Vec<LiftedAtom>, variables: usize, components: usize) -> Self {
        let mut goal = LiftedGoal {
            atoms,
            variables,
            constraints: Vec::new(),
            components,
        };
        goal.canonicalize();
        let n = goal.variables as Var;
        goal.constraints = (0..n).flat_map(|x| (x + 1..n).map(move |y| (x, y))).collect();
        goal
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Orders atoms greedily by (predicate, argument pattern) and renames
    /// variables in order of first occurrence.
    fn canonicalize(&mut self) {
        const FRESH: u64 = 1 << 32;
        let mut remaining = std::mem::take(&mut self.atoms);
        let mut label: BTreeMap<Var, Var> = BTreeMap::new();
        let mut ordered = Vec::with_capacity(remaining.len());
        while !remaining.is_empty() {
            let key = |a: &LiftedAtom| {
                let mut local: Vec<Var> = Vec::new();
                let codes: Vec<u64> = a
                    .args
                    .iter()
                    .map(|v| match label.get(v) {
                        Some(&l) => l as u64,
                        None => {
                            let pos = local.iter().position(|x| x == v).unwrap_or_else(|| {
                                local.push(*v);
                                local.len() - 1
                            });
                            FRESH + pos as u64
                        }
                    })
                    .collect();
                (a.predicate, codes)
            };
            let best = (0..remaining.len())
                .min_by_key(|&i| key(&remaining[i]))
                .expect("nonempty");
            let atom = remaining.swap_remove(best);
            for v in &atom.args {
                let next = label.len() as Var;
                label.entry(*v).or_insert(next);
            }
            ordered.push(atom);
        }
        self.atoms = ordered
            .into_iter()
            .map(|a| LiftedAtom {
                predicate: a.predicate,
                args: a.args.iter().map(|v| label[v]).collect(),
            })
            .collect();
        self.variables = label.len();
    }

    /// The schema's atoms with variables read as object ids.
    fn as_state(&self) -> State {
        self.atoms
            .iter()
            .map(|a| Atom::new(a.predicate, a.args.iter().map(|&v| ObjectId(v))))
            .collect()
    }

    /// Equal up to a renaming of variables.
    pub fn is_isomorphic(&self, other: &LiftedGoal) -> bool {
        self.atoms.len() == other.atoms.len()
            && self.variables == other.variables
            && self.constraints.len() == other.constraints.len()
            && self.signature() == other.signature()
            && ground_schema(self, &other.as_state(), None).is_some()
    }

    fn signature(&self) -> Vec<(PredicateId, usize)> {
        let mut sig: Vec<(PredicateId, usize)> = self.atoms.iter().map(|a| (a.predicate, a.args.len())).collect();
        sig.sort_unstable();
        sig
    }

    pub fn display<'a>(&'a self, domain: &'a Domain) -> DisplayLifted<'a> {
        DisplayLifted { goal: self, domain }
    }
}

pub fn var_name(v: Var) -> String {
    const NAMES: [&str; 6] = ["X", "Y", "Z", "W", "U", "V"];
    NAMES
        .get(v as usize)
        .map(|s| s.to_string())
        .unwrap_or_else(|| format!("X{v}"))
}

pub struct DisplayLifted<'a> {
    goal: &'a LiftedGoal,
    domain: &'a Domain,
}

impl fmt::Display for DisplayLifted<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let atoms: Vec<String> = self
            .goal
            .atoms
            .iter()
            .map(|a| {
                let mut s = format!("({}", self.domain.predicate(a.predicate).name);
                for &v in &a.args {
                    s.push(' ');
                    s.push_str(&var_name(v));
                }
                s.push(')');
                s
            })
            .collect();
        write!(f, "{}", atoms.join(" "))?;
        if !self.goal.constraints.is_empty() {
            let neq: Vec<String> = self
                .goal
                .constraints
                .iter()
                .map(|&(x, y)| format!("{}!={}", var_name(x), var_name(y)))
                .collect();
            write!(f, " [{}]", neq.join(", "))?;
        }
        Ok(())
    }
}

/// All connected vertex-induced subgraphs of one component, as sorted
/// vertex lists.
fn connected_subsets(graph: &DependencyGraph, component: &[usize], cap: usize) -> Result<Vec<Vec<usize>>, LiftError> {
    let m = component.len();
    if m > cap {
        return Err(LiftError::ComponentTooLarge { size: m, cap });
    }
    let adjacent = |a: usize, b: usize| {
        let (i, j) = (component[a].min(component[b]), component[a].max(component[b]));
        graph.edges.contains(&(i, j))
    };
    let mut out = Vec::new();
    for mask in 1u32..(1u32 << m) {
        let first = mask.trailing_zeros() as usize;
        let mut seen = 1u32 << first;
        let mut frontier = vec![first];
        while let Some(v) = frontier.pop() {
            for u in 0..m {
                if mask & (1 << u) != 0 && seen & (1 << u) == 0 && adjacent(v, u) {
                    seen |= 1 << u;
                    frontier.push(u);
                }
            }
        }
        if seen == mask {
            out.push((0..m).filter(|&u| mask & (1 << u) != 0).map(|u| component[u]).collect());
        }
    }
    Ok(out)
}

/// The propositional subgoals before lifting: one connected subgraph (or
/// nothing) per component, excluding the all-empty choice.
pub fn propositional_subgoals(goal: &AtomSet, component_cap: usize, limit: usize) -> Result<Vec<AtomSet>, LiftError> {
    let graph = build_dependency_graph(goal)?;
    let mut selections: Vec<Vec<usize>> = vec![Vec::new()];
    for component in graph.components() {
        let subsets = connected_subsets(&graph, &component, component_cap)?;
        let mut next = Vec::with_capacity(selections.len() * (subsets.len() + 1));
        for sel in &selections {
            next.push(sel.clone());
            for s in &subsets {
                let mut combined = sel.clone();
                combined.extend_from_slice(s);
                next.push(combined);
            }
            if next.len() > limit + 1 {
                return Err(LiftError::TooManySubgoals { cap: limit });
            }
        }
        selections = next;
    }
    Ok(selections
        .into_iter()
        .filter(|s| !s.is_empty())
        .map(|s| s.into_iter().map(|v| graph.vertices[v].clone()).collect())
        .collect())
}

pub fn enumerate_lifted_goals(goal: &AtomSet) -> Result<Vec<LiftedGoal>, LiftError> {
    enumerate_lifted_goals_with(goal, DEFAULT_COMPONENT_CAP, DEFAULT_SCHEMA_CAP)
}

pub fn enumerate_lifted_goals_with(
    goal: &AtomSet,
    component_cap: usize,
    schema_cap: usize,
) -> Result<Vec<LiftedGoal>, LiftError> {
    let graph = build_dependency_graph(goal)?;
    // Isomorphism classes of single connected pieces, shared across components.
    let mut classes: Vec<LiftedGoal> = Vec::new();
    let mut per_component: Vec<BTreeSet<usize>> = Vec::new();
    for component in graph.components() {
        let mut ids = BTreeSet::new();
        for subset in connected_subsets(&graph, &component, component_cap)? {
            let atoms: Vec<Atom> = subset.iter().map(|&v| graph.vertices[v].clone()).collect();
            let piece = LiftedGoal::lift(&atoms, 1);
            let id = match classes.iter().position(|c| c.is_isomorphic(&piece)) {
                Some(id) => id,
                None => {
                    classes.push(piece);
                    classes.len() - 1
                }
            };
            ids.insert(id);
        }
        per_component.push(ids);
    }

    // Multisets of piece classes, at most one piece per component.
    let mut combos: BTreeSet<Vec<usize>> = BTreeSet::from([Vec::new()]);
    for ids in &per_component {
        let mut next = combos.clone();
        for combo in &combos {
            for &id in ids {
                let mut c = combo.clone();
                let at = c.partition_point(|&x| x <= id);
                c.insert(at, id);
                next.insert(c);
            }
            if next.len() > schema_cap + 1 {
                return Err(LiftError::TooManySubgoals { cap: schema_cap });
            }
        }
        combos = next;
    }

    let mut schemas: Vec<LiftedGoal> = combos
        .into_iter()
        .filter(|c| !c.is_empty())
        .map(|combo| {
            let mut atoms = Vec::new();
            let mut offset = 0;
            for &id in &combo {
                let piece = &classes[id];
                atoms.extend(piece.atoms.iter().map(|a| LiftedAtom {
                    predicate: a.predicate,
                    args: a.args.iter().map(|v| v + offset).collect(),
                }));
                offset += piece.variables as Var;
            }
            LiftedGoal::with_all_distinct(atoms, offset as usize, combo.len())
        })
        .collect();
    schemas.sort_by(schema_order);
    Ok(schemas)
}

/// Larger schemas first, then by canonical atoms.
pub fn schema_order(a: &LiftedGoal, b: &LiftedGoal) -> std::cmp::Ordering {
    b.atoms
        .len()
        .cmp(&a.atoms.len())
        .then_with(|| a.atoms.cmp(&b.atoms))
        .then_with(|| a.variables.cmp(&b.variables))
}

/// An injective variable assignment.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Grounding {
    pub assignment: Vec<ObjectId>,
}

impl Grounding {
    pub fn apply(&self, schema: &LiftedGoal) -> AtomSet {
        schema
            .atoms
            .iter()
            .map(|a| Atom::new(a.predicate, a.args.iter().map(|&v| self.assignment[v as usize])))
            .collect()
    }
}

/// Finds an assignment of the schema's variables to objects that satisfies
/// every inequality constraint and maps every atom into `state`.
///
/// Backtracking with forward checking: the atom with the fewest consistent
/// candidates is expanded next, candidates in state order (or shuffled when
/// `rng` is given).
pub fn ground_schema(schema: &LiftedGoal, state: &State, mut rng: Option<&mut dyn RngCore>) -> Option<Grounding> {
    let mut distinct: Vec<Vec<Var>> = vec![Vec::new(); schema.variables];
    for &(x, y) in &schema.constraints {
        distinct[x as usize].push(y);
        distinct[y as usize].push(x);
    }
    let mut search = Matcher {
        schema,
        state,
        distinct,
        assignment: vec![None; schema.variables],
        done: vec![false; schema.atoms.len()],
    };
    if search.solve(&mut rng) {
        Some(Grounding {
            assignment: search
                .assignment
                .into_iter()
                .map(|o| o.expect("every variable occurs in an atom"))
                .collect(),
        })
    } else {
        None
    }
}

struct Matcher<'a> {
    schema: &'a LiftedGoal,
    state: &'a State,
    distinct: Vec<Vec<Var>>,
    assignment: Vec<Option<ObjectId>>,
    done: Vec<bool>,
}

impl Matcher<'_> {
    /// Binds the atom's variables to `candidate`; returns the newly bound
    /// variables, or `None` (with nothing bound) on conflict.
    fn bind(&mut self, atom: usize, candidate: &Atom) -> Option<SmallVec<[Var; 4]>> {
        let pattern = &self.schema.atoms[atom];
        let mut bound: SmallVec<[Var; 4]> = SmallVec::new();
        for (&v, &o) in pattern.args.iter().zip(&candidate.args) {
            let ok = match self.assignment[v as usize] {
                Some(existing) => existing == o,
                None => {
                    let clash = self.distinct[v as usize]
                        .iter()
                        .any(|&w| self.assignment[w as usize] == Some(o));
                    if !clash {
                        self.assignment[v as usize] = Some(o);
                        bound.push(v);
                    }
                    !clash
                }
            };
            if !ok {
                self.unbind(&bound);
                return None;
            }
        }
        Some(bound)
    }

    fn unbind(&mut self, vars: &[Var]) {
        for &v in vars {
            self.assignment[v as usize] = None;
        }
    }

    fn consistent(&mut self, atom: usize, candidate: &Atom) -> bool {
        match self.bind(atom, candidate) {
            Some(bound) => {
                self.unbind(&bound);
                true
            }
            None => false,
        }
    }

    fn solve(&mut self, rng: &mut Option<&mut dyn RngCore>) -> bool {
        let state = self.state;
        let mut best: Option<(usize, usize)> = None;
        for atom in 0..self.schema.atoms.len() {
            if self.done[atom] {
                continue;
            }
            let predicate = self.schema.atoms[atom].predicate;
            let count = state
                .with_predicate(predicate)
                .iter()
                .filter(|c| self.consistent(atom, c))
                .count();
            if count == 0 {
                return false;
            }
            if best.is_none_or(|(_, n)| count < n) {
                best = Some((atom, count));
            }
        }
        let Some((atom, _)) = best else {
            return true;
        };
        let mut candidates: Vec<&Atom> = state
            .with_predicate(self.schema.atoms[atom].predicate)
            .iter()
            .collect();
        if let Some(rng) = rng.as_mut() {
            candidates.shuffle(rng);
        }
        self.done[atom] = true;
        for candidate in candidates {
            if let Some(bound) = self.bind(atom, candidate) {
                if self.solve(rng) {
                    return true;
                }
                self.unbind(&bound);
            }
        }
        self.done[atom] = false;
        false
    }
}
