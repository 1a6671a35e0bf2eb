//! Dependency inference: partition by key payload, build the model trace and prefix tree,
//! merge with kTail, split into key and non-key sub-models and annotate probabilities.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::analysis::MessageAnalysis;
use crate::error::{Error, Result};
use crate::model::{DependencyModel, ModelKind, StateId, INITIAL};
use crate::trace::{InteractionTrace, InteractionType, KeyPayload};

/// Interactions of one data record (plus every unkeyed interaction), as trace positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    /// Empty for the single partition of a trace without keyed interactions.
    pub key: KeyPayload,
    pub interactions: Vec<usize>,
}

/// Splits the trace into per-record sub-traces in first-appearance order of the keys.
/// Unkeyed interactions are copied into every partition. A trace without keyed interactions
/// yields one partition under the empty key.
pub fn partition_trace(trace: &InteractionTrace) -> Vec<Partition> {
    let keys: Vec<KeyPayload> = trace.interactions.iter().map(|i| trace.key_of(i)).collect();
    let mut order: Vec<KeyPayload> = Vec::new();
    let mut slot: HashMap<&KeyPayload, usize> = HashMap::new();
    for k in keys.iter().filter(|k| !k.is_empty()) {
        if !slot.contains_key(k) {
            slot.insert(k, order.len());
            order.push(k.clone());
        }
    }
    if order.is_empty() {
        if trace.is_empty() {
            return Vec::new();
        }
        return vec![Partition {
            key: KeyPayload::default(),
            interactions: (0..trace.len()).collect(),
        }];
    }
    let mut parts: Vec<Partition> = order
        .into_iter()
        .map(|key| Partition {
            key,
            interactions: Vec::new(),
        })
        .collect();
    for (idx, k) in keys.iter().enumerate() {
        if k.is_empty() {
            for p in parts.iter_mut() {
                p.interactions.push(idx);
            }
        } else {
            parts[slot[k]].interactions.push(idx);
        }
    }
    parts
}

/// Per-record sequences of interaction types, labels interned into `alphabet`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ModelTrace {
    pub alphabet: Vec<InteractionType>,
    pub sequences: Vec<(KeyPayload, Vec<u32>)>,
}

impl ModelTrace {
    pub fn from_labels(sequences: Vec<(KeyPayload, Vec<InteractionType>)>) -> ModelTrace {
        let mut alphabet: BTreeSet<InteractionType> = BTreeSet::new();
        for (_, s) in &sequences {
            alphabet.extend(s.iter().cloned());
        }
        let alphabet: Vec<InteractionType> = alphabet.into_iter().collect();
        let index: HashMap<&InteractionType, u32> = alphabet
            .iter()
            .enumerate()
            .map(|(i, t)| (t, i as u32))
            .collect();
        let sequences = sequences
            .iter()
            .map(|(k, s)| (k.clone(), s.iter().map(|t| index[t]).collect()))
            .collect();
        ModelTrace {
            alphabet,
            sequences,
        }
    }

    pub fn events(&self, i: usize) -> Vec<&InteractionType> {
        self.sequences[i]
            .1
            .iter()
            .map(|&l| &self.alphabet[l as usize])
            .collect()
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    /// One line per sequence, events separated by `,`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for i in 0..self.len() {
            let labels: Vec<String> = self.events(i).iter().map(|t| t.label()).collect();
            out.push_str(&labels.join(","));
            out.push('\n');
        }
        out
    }
}

/// Rewrites each partition as its sequence of interaction types.
pub fn build_model_trace(partitions: &[Partition], analysis: &MessageAnalysis) -> ModelTrace {
    let alphabet: Vec<InteractionType> = analysis.interaction_types().cloned().collect();
    let index: HashMap<&InteractionType, u32> = alphabet
        .iter()
        .enumerate()
        .map(|(i, t)| (t, i as u32))
        .collect();
    let sequences = partitions
        .iter()
        .map(|p| {
            let events = p
                .interactions
                .iter()
                .map(|&i| index[&analysis.assignments[i]])
                .collect();
            (p.key.clone(), events)
        })
        .collect();
    ModelTrace {
        alphabet,
        sequences,
    }
}

/// Prefix tree acceptor: one path per sequence, common prefixes shared. Edge counts record how
/// many sequences pass along each edge.
pub fn build_pta(mt: &ModelTrace) -> DependencyModel {
    let mut model = DependencyModel::new(ModelKind::Full, mt.alphabet.clone());
    let mut child: HashMap<(StateId, u32), StateId> = HashMap::new();
    for (_, seq) in &mt.sequences {
        let mut at = INITIAL;
        for &l in seq {
            let next = match child.get(&(at, l)) {
                Some(&n) => n,
                None => {
                    let n = model.add_state(l);
                    child.insert((at, l), n);
                    n
                }
            };
            model.add_transition(at, next, 1);
            at = next;
        }
    }
    model
}

fn quotient(model: &DependencyModel, class: &[usize], class_labels: &[u32]) -> DependencyModel {
    let mut out = DependencyModel::new(model.kind, model.alphabet().to_vec());
    for &l in &class_labels[1..] {
        out.add_state(l);
    }
    for (from, e) in model.edges() {
        out.add_transition(class[from], class[e.target], e.count);
    }
    out
}

/// Label sequences of length 1..=k readable from `state`.
fn tails(model: &DependencyModel, state: StateId, k: usize) -> BTreeSet<Vec<u32>> {
    let mut out = BTreeSet::new();
    let mut frontier: Vec<(StateId, Vec<u32>)> = vec![(state, Vec::new())];
    for _ in 0..k {
        let mut next = Vec::new();
        let mut seen = BTreeSet::new();
        for (s, path) in frontier {
            for e in model.out_edges(s) {
                let mut p = path.clone();
                p.push(model.label_index(e.target).expect("non-initial target"));
                if seen.insert((e.target, p.clone())) {
                    out.insert(p.clone());
                    next.push((e.target, p));
                }
            }
        }
        frontier = next;
    }
    out
}

/// Merges equivalent states. With `k = 0` states are equivalent iff they carry the same label;
/// with larger `k` their label sequences of length up to `k` must also agree. Merged states
/// inherit the union of edges with summed counts. The result is canonicalized.
pub fn ktail_merge(model: &DependencyModel, k: i32) -> Result<DependencyModel> {
    if k < 0 {
        return Err(Error::Argument(format!(
            "kTail depth must be non-negative, got {k}"
        )));
    }
    let k = k as usize;
    let mut current = model.clone();
    current.clear_probabilities();
    loop {
        let n = current.state_count();
        let mut ids: HashMap<(u32, BTreeSet<Vec<u32>>), usize> = HashMap::new();
        let mut class = vec![0usize; n];
        let mut class_labels = vec![0u32];
        for s in 1..n {
            let label = current.label_index(s).expect("non-initial state");
            let t = if k == 0 {
                BTreeSet::new()
            } else {
                tails(&current, s, k)
            };
            let next = class_labels.len();
            let c = *ids.entry((label, t)).or_insert(next);
            if c == next {
                class_labels.push(label);
            }
            class[s] = c;
        }
        let merged = quotient(&current, &class, &class_labels);
        let done = merged.state_count() == n;
        current = merged;
        if done {
            break;
        }
    }
    Ok(current.canonicalize())
}

/// The `k = 0` merge computed straight from the model trace: one state per label, one edge per
/// consecutive label pair. Equal to `ktail_merge(&build_pta(mt), 0)` without building the tree,
/// which matters when unkeyed interactions are replicated into hundreds of partitions.
pub fn merge_by_label(mt: &ModelTrace) -> DependencyModel {
    let mut model = DependencyModel::new(ModelKind::Full, mt.alphabet.clone());
    let mut state_of: HashMap<u32, StateId> = HashMap::new();
    for (_, seq) in &mt.sequences {
        let mut at = INITIAL;
        for &l in seq {
            let next = *state_of.entry(l).or_insert_with(|| model.add_state(l));
            model.add_transition(at, next, 1);
            at = next;
        }
    }
    model.canonicalize()
}

/// Request types with at least one keyed training request, and those that are only sometimes keyed.
pub fn keyed_request_types(
    trace: &InteractionTrace,
    analysis: &MessageAnalysis,
) -> (BTreeSet<String>, BTreeSet<String>) {
    let mut seen: BTreeMap<&str, (bool, bool)> = BTreeMap::new();
    for (i, it) in trace.interactions.iter().enumerate() {
        let e = seen
            .entry(analysis.assignments[i].request.as_str())
            .or_default();
        if trace.key_of(it).is_empty() {
            e.1 = true;
        } else {
            e.0 = true;
        }
    }
    let keyed = seen
        .iter()
        .filter(|(_, v)| v.0)
        .map(|(k, _)| k.to_string())
        .collect();
    let mixed = seen
        .iter()
        .filter(|(_, v)| v.0 && v.1)
        .map(|(k, _)| k.to_string())
        .collect();
    (keyed, mixed)
}

/// Pseudo-count for `INITIAL` edges added to states that lost every predecessor.
pub const REPAIR_COUNT: u64 = 1;

fn sub_model(
    full: &DependencyModel,
    mt: &ModelTrace,
    kind: ModelKind,
    keep: &dyn Fn(&InteractionType) -> bool,
) -> DependencyModel {
    let n = full.state_count();
    let kept: Vec<bool> = (0..n)
        .map(|s| s == INITIAL || full.label(s).is_some_and(keep))
        .collect();
    let mut new_id: Vec<Option<StateId>> = vec![None; n];
    new_id[INITIAL] = Some(INITIAL);
    let mut out = DependencyModel::new(kind, full.alphabet().to_vec());
    for s in 1..n {
        if kept[s] {
            new_id[s] = Some(out.add_state(full.label_index(s).expect("labeled")));
        }
    }
    // Project every training path onto kept states, bridging across removed ones.
    let mut projected: BTreeMap<(StateId, StateId), u64> = BTreeMap::new();
    if full.alphabet() == mt.alphabet.as_slice() {
        for (_, seq) in &mt.sequences {
            let Some(path) = full.trace_path(seq) else {
                continue;
            };
            let mut prev = INITIAL;
            for s in path.into_iter().filter(|&s| kept[s]) {
                *projected.entry((prev, s)).or_default() += 1;
                prev = s;
            }
        }
    }
    for (from, e) in full.edges() {
        if kept[from] && kept[e.target] {
            projected.entry((from, e.target)).or_insert(e.count);
        }
    }
    for ((from, to), count) in projected {
        out.add_transition(
            new_id[from].expect("kept"),
            new_id[to].expect("kept"),
            count,
        );
    }
    let mut has_pred = vec![false; out.state_count()];
    for (_, e) in out.edges() {
        has_pred[e.target] = true;
    }
    for (s, p) in has_pred.iter().enumerate().skip(1) {
        if !p {
            out.add_transition(INITIAL, s, REPAIR_COUNT);
        }
    }
    let reach = out.reachable();
    let mut extra = Vec::new();
    for (s, r) in reach.iter().enumerate() {
        if !r {
            extra.push(s);
        }
    }
    // Cycles cut off from INITIAL: connect their smallest state.
    for s in extra {
        if !out.reachable()[s] {
            out.add_transition(INITIAL, s, REPAIR_COUNT);
        }
    }
    out.canonicalize()
}

/// Splits a merged model into the keyed sub-model (request types in `keyed`) and the non-key
/// sub-model. Edges follow the training paths projected onto each side.
pub fn split_model(
    full: &DependencyModel,
    mt: &ModelTrace,
    keyed: &BTreeSet<String>,
) -> (DependencyModel, DependencyModel) {
    let key = sub_model(full, mt, ModelKind::Key, &|t| keyed.contains(&t.request));
    let nonkey = sub_model(full, mt, ModelKind::NonKey, &|t| {
        !keyed.contains(&t.request)
    });
    (key, nonkey)
}

/// Sets each edge probability to its count over the total count of edges leaving the same state
/// towards the same request type.
pub fn annotate_probabilities(model: &DependencyModel) -> DependencyModel {
    let mut out = model.clone();
    for s in 0..out.state_count() {
        let mut totals: HashMap<&str, u64> = HashMap::new();
        for e in model.out_edges(s) {
            let r = model.label(e.target).expect("labeled").request.as_str();
            *totals.entry(r).or_default() += e.count;
        }
        for (i, e) in model.out_edges(s).iter().enumerate() {
            let r = model.label(e.target).expect("labeled").request.as_str();
            let total = totals[r];
            let p = if total == 0 {
                let same = model
                    .out_edges(s)
                    .iter()
                    .filter(|x| model.label(x.target).expect("labeled").request == r)
                    .count();
                out.set_count(s, i, 0);
                1.0 / same as f64
            } else {
                e.count as f64 / total as f64
            };
            out.set_probability(s, i, p);
        }
    }
    out
}

/// Everything dependency inference produces for one trace.
#[derive(Debug, Clone)]
pub struct Inference {
    pub partitions: Vec<Partition>,
    pub model_trace: ModelTrace,
    pub full: DependencyModel,
    pub key: DependencyModel,
    pub nonkey: DependencyModel,
    pub keyed_types: BTreeSet<String>,
    /// Request types seen both with and without a key payload; treated as keyed.
    pub mixed_types: BTreeSet<String>,
}

pub fn infer(trace: &InteractionTrace, analysis: &MessageAnalysis, k: i32) -> Result<Inference> {
    if analysis.assignments.len() != trace.len() {
        return Err(Error::Invariant(
            "analysis does not belong to this trace".into(),
        ));
    }
    let partitions = partition_trace(trace);
    let model_trace = build_model_trace(&partitions, analysis);
    let merged = if k == 0 {
        merge_by_label(&model_trace)
    } else {
        ktail_merge(&build_pta(&model_trace), k)?
    };
    let (keyed_types, mixed_types) = keyed_request_types(trace, analysis);
    let (key, nonkey) = split_model(&merged, &model_trace, &keyed_types);
    Ok(Inference {
        partitions,
        model_trace,
        full: annotate_probabilities(&merged),
        key: annotate_probabilities(&key),
        nonkey: annotate_probabilities(&nonkey),
        keyed_types,
        mixed_types,
    })
}
