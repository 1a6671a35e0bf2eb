//! Labeled automata over interaction types.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::trace::InteractionType;

pub type StateId = usize;

/// The initial state always has id 0.
pub const INITIAL: StateId = 0;

const FORMAT_HEADER: &str = "statemock-model v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Full,
    Key,
    NonKey,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Full => "Full",
            ModelKind::Key => "Key",
            ModelKind::NonKey => "NonKey",
        }
    }

    fn parse(s: &str) -> Option<ModelKind> {
        match s {
            "Full" => Some(ModelKind::Full),
            "Key" => Some(ModelKind::Key),
            "NonKey" => Some(ModelKind::NonKey),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub target: StateId,
    /// Training transitions observed along this edge.
    pub count: u64,
    pub probability: Option<f64>,
}

/// An automaton whose states carry interaction-type labels. State 0 is `INITIAL`.
#[derive(Debug, Clone, PartialEq)]
pub struct DependencyModel {
    pub kind: ModelKind,
    alphabet: Vec<InteractionType>,
    /// Label index per state; `None` only for `INITIAL`.
    states: Vec<Option<u32>>,
    /// Outgoing edges per state, sorted by target.
    out: Vec<Vec<Edge>>,
}

impl DependencyModel {
    pub fn new(kind: ModelKind, alphabet: Vec<InteractionType>) -> Self {
        DependencyModel {
            kind,
            alphabet,
            states: vec![None],
            out: vec![Vec::new()],
        }
    }

    pub fn alphabet(&self) -> &[InteractionType] {
        &self.alphabet
    }

    pub fn add_state(&mut self, label: u32) -> StateId {
        self.states.push(Some(label));
        self.out.push(Vec::new());
        self.states.len() - 1
    }

    /// Adds `count` traversals to edge `from -> to`, creating it if needed.
    pub fn add_transition(&mut self, from: StateId, to: StateId, count: u64) {
        let edges = &mut self.out[from];
        match edges.binary_search_by_key(&to, |e| e.target) {
            Ok(i) => edges[i].count += count,
            Err(i) => edges.insert(
                i,
                Edge {
                    target: to,
                    count,
                    probability: None,
                },
            ),
        }
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn edge_count(&self) -> usize {
        self.out.iter().map(Vec::len).sum()
    }

    pub fn label_index(&self, state: StateId) -> Option<u32> {
        self.states[state]
    }

    pub fn label(&self, state: StateId) -> Option<&InteractionType> {
        self.states[state].map(|l| &self.alphabet[l as usize])
    }

    pub fn out_edges(&self, state: StateId) -> &[Edge] {
        &self.out[state]
    }

    pub fn edges(&self) -> impl Iterator<Item = (StateId, &Edge)> {
        self.out
            .iter()
            .enumerate()
            .flat_map(|(s, es)| es.iter().map(move |e| (s, e)))
    }

    pub fn edge(&self, from: StateId, to: StateId) -> Option<&Edge> {
        let es = &self.out[from];
        es.binary_search_by_key(&to, |e| e.target)
            .ok()
            .map(|i| &es[i])
    }

    pub fn labels(&self) -> impl Iterator<Item = &InteractionType> {
        self.states
            .iter()
            .flatten()
            .map(|&l| &self.alphabet[l as usize])
    }

    pub fn has_probabilities(&self) -> bool {
        self.edges().any(|(_, e)| e.probability.is_some())
    }

    pub fn clear_probabilities(&mut self) {
        for es in &mut self.out {
            for e in es {
                e.probability = None;
            }
        }
    }

    pub(crate) fn set_probability(&mut self, from: StateId, index: usize, p: f64) {
        self.out[from][index].probability = Some(p);
    }

    pub(crate) fn set_count(&mut self, from: StateId, index: usize, count: u64) {
        self.out[from][index].count = count;
    }

    pub fn is_tree(&self) -> bool {
        let mut indeg = vec![0usize; self.states.len()];
        for (_, e) in self.edges() {
            indeg[e.target] += 1;
        }
        indeg[INITIAL] == 0 && indeg[1..].iter().all(|&d| d == 1)
    }

    pub fn reachable(&self) -> Vec<bool> {
        let mut seen = vec![false; self.states.len()];
        let mut queue = VecDeque::from([INITIAL]);
        seen[INITIAL] = true;
        while let Some(s) = queue.pop_front() {
            for e in &self.out[s] {
                if !seen[e.target] {
                    seen[e.target] = true;
                    queue.push_back(e.target);
                }
            }
        }
        seen
    }

    /// Renumbers states in breadth-first first-reach order from `INITIAL`, visiting successors
    /// by label text, and drops unreachable states.
    pub fn canonicalize(&self) -> DependencyModel {
        let mut order = vec![INITIAL];
        let mut new_id: Vec<Option<StateId>> = vec![None; self.states.len()];
        new_id[INITIAL] = Some(0);
        let mut head = 0;
        while head < order.len() {
            let s = order[head];
            head += 1;
            let mut succ: Vec<StateId> = self.out[s].iter().map(|e| e.target).collect();
            succ.sort_by(|a, b| self.label(*a).cmp(&self.label(*b)).then(a.cmp(b)));
            for t in succ {
                if new_id[t].is_none() {
                    new_id[t] = Some(order.len());
                    order.push(t);
                }
            }
        }
        let mut out = DependencyModel::new(self.kind, self.alphabet.clone());
        for &s in &order[1..] {
            out.add_state(self.states[s].expect("non-initial state has a label"));
        }
        for &s in &order {
            let from = new_id[s].expect("ordered");
            for e in &self.out[s] {
                let to = new_id[e.target].expect("reachable");
                out.add_transition(from, to, e.count);
                if let Some(p) = e.probability {
                    let idx = out.out[from]
                        .binary_search_by_key(&to, |x| x.target)
                        .expect("added");
                    out.out[from][idx].probability = Some(p);
                }
            }
        }
        out
    }

    /// Successor states of `state` whose label equals `label`.
    pub fn successors_with_label(
        &self,
        state: StateId,
        label: u32,
    ) -> impl Iterator<Item = StateId> + '_ {
        self.out[state]
            .iter()
            .filter(move |e| self.states[e.target] == Some(label))
            .map(|e| e.target)
    }

    pub fn label_id(&self, label: &InteractionType) -> Option<u32> {
        self.alphabet
            .iter()
            .position(|l| l == label)
            .map(|i| i as u32)
    }

    /// True if some path from `INITIAL` spells `sequence`.
    pub fn accepts(&self, sequence: &[InteractionType]) -> bool {
        let ids: Option<Vec<u32>> = sequence.iter().map(|l| self.label_id(l)).collect();
        match ids {
            Some(ids) => self.accepts_ids(&ids),
            None => sequence.is_empty(),
        }
    }

    pub fn accepts_ids(&self, sequence: &[u32]) -> bool {
        let mut current: HashSet<StateId> = HashSet::from([INITIAL]);
        for &l in sequence {
            let next: HashSet<StateId> = current
                .iter()
                .flat_map(|&s| self.successors_with_label(s, l))
                .collect();
            if next.is_empty() {
                return false;
            }
            current = next;
        }
        true
    }

    /// A state path (excluding `INITIAL`) spelling `sequence`, found by depth-first search.
    pub fn trace_path(&self, sequence: &[u32]) -> Option<Vec<StateId>> {
        let mut path = Vec::with_capacity(sequence.len());
        let mut dead: HashSet<(StateId, usize)> = HashSet::new();
        let mut stack: Vec<(StateId, usize, Vec<StateId>)> = Vec::new();
        let first: Vec<StateId> = match sequence.first() {
            None => return Some(path),
            Some(&l) => self.successors_with_label(INITIAL, l).collect(),
        };
        stack.push((INITIAL, 0, first));
        while let Some((_, pos, cands)) = stack.last_mut() {
            let pos = *pos;
            match cands.pop() {
                None => {
                    let (s, p, _) = stack.pop().expect("non-empty");
                    dead.insert((s, p));
                    path.pop();
                }
                Some(next) => {
                    if pos + 1 == sequence.len() {
                        path.push(next);
                        return Some(path);
                    }
                    if dead.contains(&(next, pos + 1)) {
                        continue;
                    }
                    let cands: Vec<StateId> = self
                        .successors_with_label(next, sequence[pos + 1])
                        .collect();
                    path.push(next);
                    stack.push((next, pos + 1, cands));
                }
            }
        }
        None
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{FORMAT_HEADER}");
        let _ = writeln!(out, "kind\t{}", self.kind.as_str());
        for (id, l) in self.states.iter().enumerate() {
            match l {
                None => {
                    let _ = writeln!(out, "state\t{id}\tINITIAL");
                }
                Some(l) => {
                    let t = &self.alphabet[*l as usize];
                    let _ = writeln!(out, "state\t{id}\t{}\t{}", t.request, t.response);
                }
            }
        }
        for (from, e) in self.edges() {
            let p = e
                .probability
                .map(|p| format!("{p:.12}"))
                .unwrap_or_else(|| "-".into());
            let _ = writeln!(out, "edge\t{from}\t{}\t{}\t{p}", e.target, e.count);
        }
        out
    }

    pub fn parse_text(text: &str) -> Result<DependencyModel> {
        let bad = |line: usize, msg: &str| Error::MalformedRecord {
            line,
            message: msg.to_string(),
        };
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h == FORMAT_HEADER => {}
            _ => return Err(bad(1, "missing model header")),
        }
        let mut kind = None;
        let mut alphabet: Vec<InteractionType> = Vec::new();
        let mut index: HashMap<InteractionType, u32> = HashMap::new();
        let mut states: Vec<Option<u32>> = Vec::new();
        let mut edges = Vec::new();
        for (i, line) in lines {
            let n = i + 1;
            let cols: Vec<&str> = line.split('\t').collect();
            match cols.as_slice() {
                ["kind", k] => {
                    kind = Some(ModelKind::parse(k).ok_or_else(|| bad(n, "unknown kind"))?)
                }
                ["state", id, "INITIAL"] => {
                    if id.parse::<usize>().ok() != Some(states.len()) || !states.is_empty() {
                        return Err(bad(n, "INITIAL must be state 0"));
                    }
                    states.push(None);
                }
                ["state", id, req, resp] => {
                    if id.parse::<usize>().ok() != Some(states.len()) {
                        return Err(bad(n, "states must be numbered consecutively"));
                    }
                    let t = InteractionType::new(*req, *resp);
                    let next = alphabet.len() as u32;
                    let l = *index.entry(t.clone()).or_insert_with(|| {
                        alphabet.push(t);
                        next
                    });
                    states.push(Some(l));
                }
                ["edge", from, to, count, p] => {
                    let from: usize = from.parse().map_err(|_| bad(n, "bad edge source"))?;
                    let to: usize = to.parse().map_err(|_| bad(n, "bad edge target"))?;
                    let count: u64 = count.parse().map_err(|_| bad(n, "bad edge count"))?;
                    let p = match *p {
                        "-" => None,
                        v => Some(v.parse::<f64>().map_err(|_| bad(n, "bad probability"))?),
                    };
                    edges.push((n, from, to, count, p));
                }
                [""] => {}
                _ => return Err(bad(n, "unrecognized model line")),
            }
        }
        let kind = kind.ok_or_else(|| bad(1, "missing kind"))?;
        if states.first() != Some(&None) {
            return Err(bad(1, "missing INITIAL state"));
        }
        let mut model = DependencyModel {
            kind,
            alphabet,
            out: vec![Vec::new(); states.len()],
            states,
        };
        for (n, from, to, count, p) in edges {
            if from >= model.states.len() || to >= model.states.len() {
                return Err(bad(n, "edge refers to unknown state"));
            }
            model.add_transition(from, to, count);
            if let Some(p) = p {
                let idx = model.out[from]
                    .binary_search_by_key(&to, |e| e.target)
                    .expect("added");
                model.out[from][idx].probability = Some(p);
            }
        }
        Ok(model)
    }

    pub fn to_dot(&self, name: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "digraph \"{name}\" {{");
        let _ = writeln!(out, "  rankdir=LR;");
        for (id, _) in self.states.iter().enumerate() {
            let label = self
                .label(id)
                .map(|l| l.label())
                .unwrap_or_else(|| "INITIAL".into());
            let shape = if id == INITIAL { "doublecircle" } else { "box" };
            let _ = writeln!(
                out,
                "  s{id} [label=\"{}\", shape={shape}];",
                label.replace('"', "\\\"")
            );
        }
        for (from, e) in self.edges() {
            match e.probability {
                Some(p) => {
                    let _ = writeln!(out, "  s{from} -> s{} [label=\"{p:.2}\"];", e.target);
                }
                None => {
                    let _ = writeln!(out, "  s{from} -> s{};", e.target);
                }
            }
        }
        out.push_str("}\n");
        out
    }

    /// Label-based structural fingerprint; equal for isomorphic models with distinct labels.
    pub fn fingerprint(&self) -> BTreeMap<(String, String), u64> {
        let name = |s: StateId| {
            self.label(s)
                .map(|l| l.label())
                .unwrap_or_else(|| "INITIAL".into())
        };
        self.edges()
            .map(|(f, e)| ((name(f), name(e.target)), e.count))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> DependencyModel {
        let alphabet = vec![
            InteractionType::new("A", "x"),
            InteractionType::new("B", "y"),
        ];
        let mut m = DependencyModel::new(ModelKind::Full, alphabet);
        let a = m.add_state(0);
        let b = m.add_state(1);
        m.add_transition(INITIAL, a, 2);
        m.add_transition(a, b, 1);
        m.add_transition(b, a, 1);
        m
    }

    #[test]
    fn text_round_trip() {
        let m = sample();
        let back = DependencyModel::parse_text(&m.to_text()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn walk_and_accept() {
        let m = sample();
        let a = InteractionType::new("A", "x");
        let b = InteractionType::new("B", "y");
        assert!(m.accepts(&[a.clone(), b.clone(), a.clone()]));
        assert!(!m.accepts(&[b.clone()]));
        assert!(m.accepts(&[]));
        assert_eq!(m.trace_path(&[0, 1, 0]), Some(vec![1, 2, 1]));
        assert_eq!(m.trace_path(&[1]), None);
    }

    #[test]
    fn canonical_order_is_stable() {
        let m = sample();
        assert_eq!(m.canonicalize(), m);
        assert!(!m.is_tree());
    }

    #[test]
    fn rejects_bad_text() {
        assert!(DependencyModel::parse_text("nope").is_err());
        assert!(DependencyModel::parse_text(
            "statemock-model v1\nkind\tFull\nstate\t0\tINITIAL\nedge\t0\t5\t1\t-\n"
        )
        .is_err());
    }

    #[test]
    fn dot_export_mentions_every_state() {
        let dot = sample().to_dot("m");
        assert!(dot.contains("INITIAL"));
        assert!(dot.contains("A_x"));
        assert!(dot.contains("s1 -> s2"));
    }
}
