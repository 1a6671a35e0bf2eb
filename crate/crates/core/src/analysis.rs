//! Message analysis: request/response type identification, format inference and
//! request/response payload equality rules.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::format::{infer_format_with_hints, MessageFormat};
use crate::message::{Message, Syntax};
use crate::trace::{Interaction, InteractionTrace, InteractionType};

pub const DEFAULT_MAX_ENUM: usize = 8;

#[derive(Debug, Clone)]
pub struct AnalysisConfig {
    /// Request type field; detected automatically when `None`.
    pub type_field: Option<String>,
    /// Largest value set a response field may have and still split a response group.
    pub max_enum: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            type_field: None,
            max_enum: DEFAULT_MAX_ENUM,
        }
    }
}

/// Equality rules of one interaction type: response placeholder `j` copies request placeholder `i`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EqualityRules {
    pub pairs: BTreeSet<(usize, usize)>,
    /// Number of training interactions the rules were checked against.
    pub support: usize,
}

impl EqualityRules {
    pub fn low_confidence(&self) -> bool {
        self.support < 2
    }

    /// Request placeholder feeding response placeholder `j`, lowest index first.
    pub fn source_for(&self, j: usize) -> Option<usize> {
        self.pairs
            .range((j, 0)..=(j, usize::MAX))
            .next()
            .map(|&(_, i)| i)
    }
}

pub type PayloadEqualityMap = BTreeMap<InteractionType, EqualityRules>;

#[derive(Debug, Clone)]
pub struct MessageAnalysis {
    pub syntax: Syntax,
    pub type_field: String,
    pub request_formats: BTreeMap<String, MessageFormat>,
    /// Response format per interaction type; `None` for types without a response.
    pub response_map: BTreeMap<InteractionType, Option<MessageFormat>>,
    pub equality_rules: PayloadEqualityMap,
    /// Interaction type of every trace interaction, by position.
    pub assignments: Vec<InteractionType>,
    /// Trace positions per interaction type, in trace order.
    pub members: BTreeMap<InteractionType, Vec<usize>>,
}

/// Picks the request type field: present in every request, fewest distinct values above one
/// (but not unique per request), leftmost on ties. When every shared field is constant, all requests share one type and the
/// leftmost non-numeric shared field is used.
pub fn detect_type_field(requests: &[&Message]) -> Result<String> {
    let first = requests.first().ok_or(Error::NoTypeField)?;
    let mut candidates: Vec<(&str, usize)> = Vec::new();
    for name in first.field_names() {
        if candidates.iter().any(|(n, _)| *n == name) {
            continue;
        }
        let mut values = BTreeSet::new();
        let mut everywhere = true;
        for m in requests {
            match m.get(name) {
                Some(v) => {
                    values.insert(v);
                }
                None => {
                    everywhere = false;
                    break;
                }
            }
        }
        if everywhere {
            candidates.push((name, values.len()));
        }
    }
    // Fields unique per request are identifiers, not types.
    let n = requests.len();
    if let Some((name, _)) = candidates
        .iter()
        .filter(|(_, d)| *d > 1 && *d < n)
        .min_by_key(|(_, d)| *d)
    {
        return Ok(name.to_string());
    }
    let numeric = |v: &str| !v.is_empty() && v.bytes().all(|b| b.is_ascii_digit());
    candidates
        .iter()
        .find(|(n, _)| !numeric(first.get(n).unwrap_or_default()))
        .or(candidates.first())
        .map(|(n, _)| n.to_string())
        .ok_or(Error::NoTypeField)
}

pub fn request_type_of<'m>(message: &'m Message, type_field: &str) -> Option<&'m str> {
    message.get(type_field)
}

/// Groups request positions by request type. Returns the type field used.
pub fn cluster_requests(
    trace: &InteractionTrace,
    type_field: Option<&str>,
) -> Result<(String, BTreeMap<String, Vec<usize>>)> {
    let requests: Vec<&Message> = trace.interactions.iter().map(|i| &i.request).collect();
    let field = match type_field {
        Some(f) => f.to_string(),
        None => detect_type_field(&requests)?,
    };
    let mut clusters: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (idx, req) in requests.iter().enumerate() {
        let ty = req
            .get(&field)
            .ok_or_else(|| Error::UnknownRequestType(req.raw().to_string()))?;
        clusters.entry(ty.to_string()).or_default().push(idx);
    }
    Ok((field, clusters))
}

/// A response group produced by [`cluster_responses`].
#[derive(Debug, Clone)]
pub struct ResponseCluster {
    pub members: Vec<usize>,
    /// Fields whose values distinguish this group from its siblings.
    pub split_fields: Vec<String>,
}

fn strip_ws(s: &str) -> String {
    s.chars().filter(|c| !c.is_whitespace()).collect()
}

/// True if some member's response echoes the request's value of the same field.
fn is_echo(trace: &InteractionTrace, members: &[usize], field: &str) -> bool {
    members.iter().any(|&i| {
        let it = &trace.interactions[i];
        match (
            it.response.as_ref().and_then(|r| r.get(field)),
            it.request.get(field),
        ) {
            (Some(a), Some(b)) => a == b,
            _ => false,
        }
    })
}

fn name_sequence(m: &Message) -> Vec<&str> {
    m.field_names().collect()
}

fn pick_split_field(
    trace: &InteractionTrace,
    members: &[usize],
    exclude: &[String],
    max_enum: usize,
) -> Option<String> {
    let responses: Vec<&Message> = members
        .iter()
        .map(|&i| {
            trace.interactions[i]
                .response
                .as_ref()
                .expect("non-null group")
        })
        .collect();
    let mut best: Option<(usize, String)> = None;
    for name in responses[0].field_names() {
        if exclude.iter().any(|e| e == name) {
            continue;
        }
        let mut values: BTreeSet<&str> = BTreeSet::new();
        let mut everywhere = true;
        for r in &responses {
            match r.get(name) {
                Some(v) => {
                    values.insert(v);
                }
                None => {
                    everywhere = false;
                    break;
                }
            }
        }
        let distinct = values.len();
        // Enumerated: small, repeating value set that is not copied from the request.
        if !everywhere || distinct < 2 || distinct > max_enum || distinct >= responses.len() {
            continue;
        }
        if is_echo(trace, members, name) {
            continue;
        }
        if best.as_ref().map_or(true, |(d, _)| distinct < *d) {
            best = Some((distinct, name.to_string()));
        }
    }
    best.map(|(_, n)| n)
}

fn split_by_field(
    trace: &InteractionTrace,
    members: &[usize],
    field: &str,
) -> BTreeMap<String, Vec<usize>> {
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for &i in members {
        let v = trace.interactions[i]
            .response
            .as_ref()
            .and_then(|r| r.get(field))
            .unwrap_or_default();
        groups.entry(v.to_string()).or_default().push(i);
    }
    groups
}

fn split_by_names(trace: &InteractionTrace, members: &[usize]) -> Vec<Vec<usize>> {
    let mut groups: Vec<(Vec<&str>, Vec<usize>)> = Vec::new();
    for &i in members {
        let names = name_sequence(trace.interactions[i].response.as_ref().expect("non-null"));
        match groups.iter_mut().find(|(n, _)| *n == names) {
            Some((_, g)) => g.push(i),
            None => groups.push((names, vec![i])),
        }
    }
    groups.into_iter().map(|(_, g)| g).collect()
}

fn homogeneous(trace: &InteractionTrace, members: &[usize]) -> bool {
    let mut it = members
        .iter()
        .map(|&i| name_sequence(trace.interactions[i].response.as_ref().expect("non-null")));
    let first = it.next();
    it.all(|n| Some(n) == first)
}

fn response_label(
    trace: &InteractionTrace,
    request_type: &str,
    type_field: &str,
    members: &[usize],
    split_fields: &[String],
) -> String {
    let first = trace.interactions[members[0]]
        .response
        .as_ref()
        .expect("non-null");
    let base = first.get(type_field).filter(|v| {
        members.iter().all(|&i| {
            trace.interactions[i]
                .response
                .as_ref()
                .and_then(|r| r.get(type_field))
                == Some(*v)
        })
    });
    let values: Vec<String> = split_fields
        .iter()
        .map(|f| strip_ws(first.get(f).unwrap_or_default()))
        .collect();
    let response = match (base, values.is_empty()) {
        (Some(b), true) => strip_ws(b),
        (Some(b), false) => format!("{}({})", strip_ws(b), values.join(",")),
        (None, false) => values.join("_"),
        (None, true) => "Rsp".to_string(),
    };
    format!("{request_type}_{response}")
}

/// Groups responses per request type by the values of small enumerated fields
/// (e.g. a result code) and labels each group `<ReqType>_<distinguishing literal>`.
pub fn cluster_responses(
    trace: &InteractionTrace,
    type_field: &str,
    request_clusters: &BTreeMap<String, Vec<usize>>,
    max_enum: usize,
) -> BTreeMap<InteractionType, ResponseCluster> {
    let mut out = BTreeMap::new();
    for (rtype, members) in request_clusters {
        let (nulls, present): (Vec<usize>, Vec<usize>) = members
            .iter()
            .partition(|&&i| trace.interactions[i].response.is_none());
        if !nulls.is_empty() {
            out.insert(
                InteractionType::null(rtype.clone()),
                ResponseCluster {
                    members: nulls,
                    split_fields: Vec::new(),
                },
            );
        }
        if present.is_empty() {
            continue;
        }
        let exclude = vec![type_field.to_string()];
        let mut groups: Vec<(Vec<usize>, Vec<String>)> = Vec::new();
        match pick_split_field(trace, &present, &exclude, max_enum) {
            Some(field) => {
                for (_, g) in split_by_field(trace, &present, &field) {
                    groups.push((g, vec![field.clone()]));
                }
            }
            None => groups.push((present, Vec::new())),
        }
        // Further refinement only where a group still mixes field layouts.
        let mut refined: Vec<(Vec<usize>, Vec<String>, Option<usize>)> = Vec::new();
        for (g, split) in groups {
            if homogeneous(trace, &g) {
                refined.push((g, split, None));
                continue;
            }
            let mut excl = exclude.clone();
            excl.extend(split.iter().cloned());
            let sub = pick_split_field(trace, &g, &excl, max_enum)
                .map(|f| (f.clone(), split_by_field(trace, &g, &f)))
                .filter(|(_, parts)| parts.values().all(|p| homogeneous(trace, p)));
            match sub {
                Some((field, parts)) => {
                    for (_, p) in parts {
                        let mut s = split.clone();
                        s.push(field.clone());
                        refined.push((p, s, None));
                    }
                }
                None => {
                    for (n, p) in split_by_names(trace, &g).into_iter().enumerate() {
                        refined.push((p, split.clone(), Some(n + 1)));
                    }
                }
            }
        }
        for (g, split, variant) in refined {
            let mut label = response_label(trace, rtype, type_field, &g, &split);
            if let Some(v) = variant {
                label = format!("{label}#{v}");
            }
            let response = label[rtype.len() + 1..].to_string();
            out.insert(
                InteractionType::new(rtype.clone(), response),
                ResponseCluster {
                    members: g,
                    split_fields: split,
                },
            );
        }
    }
    out
}

fn varying_fields<'a, I>(messages: I) -> BTreeSet<String>
where
    I: IntoIterator<Item = &'a Message>,
{
    let mut seen: HashMap<&str, &str> = HashMap::new();
    let mut varying = BTreeSet::new();
    for m in messages {
        for (n, v) in m.fields() {
            match seen.get(n.as_str()) {
                Some(prev) if prev != v => {
                    varying.insert(n.clone());
                }
                Some(_) => {}
                None => {
                    seen.insert(n, v);
                }
            }
        }
    }
    varying
}

/// Payload equality rules per interaction type: `(j, i)` is emitted iff response placeholder `j`
/// equals request placeholder `i` in every member interaction.
pub fn infer_equality_rules(
    trace: &InteractionTrace,
    request_formats: &BTreeMap<String, MessageFormat>,
    response_map: &BTreeMap<InteractionType, Option<MessageFormat>>,
    members: &BTreeMap<InteractionType, Vec<usize>>,
) -> PayloadEqualityMap {
    let mut out = PayloadEqualityMap::new();
    for (itype, format) in response_map {
        let Some(rf) = format else { continue };
        let Some(qf) = request_formats.get(&itype.request) else {
            continue;
        };
        let ids = &members[itype];
        let mut pairs: Option<BTreeSet<(usize, usize)>> = None;
        for &idx in ids {
            let it = &trace.interactions[idx];
            let req = qf.extract_by_name(&it.request);
            let resp = rf
                .extract(it.response.as_ref().expect("non-null member"))
                .expect("member matches its format");
            let mut here = BTreeSet::new();
            for (j, rv) in resp.iter().enumerate() {
                let Some(rv) = rv else { continue };
                for (i, qv) in req.iter().enumerate() {
                    if qv.as_deref() == Some(rv.as_str()) {
                        here.insert((j + 1, i + 1));
                    }
                }
            }
            pairs = Some(match pairs {
                None => here,
                Some(p) => p.intersection(&here).copied().collect(),
            });
        }
        out.insert(
            itype.clone(),
            EqualityRules {
                pairs: pairs.unwrap_or_default(),
                support: ids.len(),
            },
        );
    }
    out
}

impl MessageAnalysis {
    pub fn analyze(trace: &InteractionTrace, config: &AnalysisConfig) -> Result<MessageAnalysis> {
        if trace.is_empty() {
            return Err(Error::Argument("cannot analyze an empty trace".into()));
        }
        let syntax = trace.syntax;
        let (type_field, req_clusters) = cluster_requests(trace, config.type_field.as_deref())?;

        let all_requests: Vec<&Message> = trace.interactions.iter().map(|i| &i.request).collect();
        let mut request_variable = varying_fields(all_requests.iter().copied());
        request_variable.remove(&type_field);
        let mut request_formats = BTreeMap::new();
        for (rtype, ids) in &req_clusters {
            let msgs: Vec<&Message> = ids
                .iter()
                .map(|&i| &trace.interactions[i].request)
                .collect();
            request_formats.insert(
                rtype.clone(),
                infer_format_with_hints(rtype, &msgs, &request_variable, syntax),
            );
        }

        let resp_clusters = cluster_responses(trace, &type_field, &req_clusters, config.max_enum);
        let mut response_map = BTreeMap::new();
        let mut members = BTreeMap::new();
        let mut assignments: Vec<Option<InteractionType>> = vec![None; trace.len()];
        for (itype, cluster) in &resp_clusters {
            for &i in &cluster.members {
                assignments[i] = Some(itype.clone());
            }
            members.insert(itype.clone(), cluster.members.clone());
            if itype.is_null() {
                response_map.insert(itype.clone(), None);
                continue;
            }
            let parent: Vec<&Message> = req_clusters[&itype.request]
                .iter()
                .filter_map(|&i| trace.interactions[i].response.as_ref())
                .collect();
            let mut hints = varying_fields(parent.iter().copied());
            let qf = &request_formats[&itype.request];
            for &i in &cluster.members {
                let it = &trace.interactions[i];
                let req_values: BTreeSet<String> = qf
                    .extract_by_name(&it.request)
                    .into_iter()
                    .flatten()
                    .collect();
                for (n, v) in it.response.as_ref().expect("non-null").fields() {
                    if req_values.contains(v) {
                        hints.insert(n.clone());
                    }
                }
            }
            for f in &cluster.split_fields {
                hints.remove(f);
            }
            hints.remove(&type_field);
            let msgs: Vec<&Message> = cluster
                .members
                .iter()
                .map(|&i| trace.interactions[i].response.as_ref().expect("non-null"))
                .collect();
            response_map.insert(
                itype.clone(),
                Some(infer_format_with_hints(
                    &itype.label(),
                    &msgs,
                    &hints,
                    syntax,
                )),
            );
        }
        let assignments = assignments
            .into_iter()
            .map(|a| a.ok_or_else(|| Error::Invariant("interaction left unclustered".into())))
            .collect::<Result<Vec<_>>>()?;
        let equality_rules = infer_equality_rules(trace, &request_formats, &response_map, &members);
        Ok(MessageAnalysis {
            syntax,
            type_field,
            request_formats,
            response_map,
            equality_rules,
            assignments,
            members,
        })
    }

    pub fn request_type<'m>(&self, request: &'m Message) -> Result<&'m str> {
        match request.get(&self.type_field) {
            Some(t) if self.request_formats.contains_key(t) => Ok(t),
            _ => Err(Error::UnknownRequestType(request.raw().to_string())),
        }
    }

    pub fn interaction_types(&self) -> impl Iterator<Item = &InteractionType> {
        self.response_map.keys()
    }

    pub fn types_for_request<'a>(
        &'a self,
        request_type: &'a str,
    ) -> impl Iterator<Item = &'a InteractionType> + 'a {
        self.response_map
            .keys()
            .filter(move |t| t.request == request_type)
    }

    /// Interaction types whose response format matches `text`; most literals first.
    pub fn matching_types(&self, text: &str) -> Vec<&InteractionType> {
        let Ok(msg) = Message::parse(text, &self.syntax) else {
            return Vec::new();
        };
        let mut hits: Vec<(&InteractionType, usize)> = self
            .response_map
            .iter()
            .filter_map(|(t, f)| {
                f.as_ref()
                    .filter(|f| f.matches(&msg))
                    .map(|f| (t, f.literal_count()))
            })
            .collect();
        hits.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        hits.into_iter().map(|(t, _)| t).collect()
    }

    /// Labels an arbitrary interaction against the inferred formats.
    pub fn interaction_type_of(&self, interaction: &Interaction) -> Result<InteractionType> {
        let rtype = self.request_type(&interaction.request)?;
        let Some(resp) = &interaction.response else {
            return Ok(InteractionType::null(rtype));
        };
        let mut best: Option<(&InteractionType, usize)> = None;
        for t in self.types_for_request(rtype) {
            if let Some(Some(f)) = self.response_map.get(t) {
                if f.matches(resp) && best.map_or(true, |(_, l)| f.literal_count() > l) {
                    best = Some((t, f.literal_count()));
                }
            }
        }
        best.map(|(t, _)| t.clone())
            .ok_or_else(|| Error::UnmatchedResponse {
                request_type: rtype.to_string(),
                raw: resp.raw().to_string(),
            })
    }

    pub fn low_confidence_types(&self) -> Vec<&InteractionType> {
        self.equality_rules
            .iter()
            .filter(|(_, r)| r.low_confidence())
            .map(|(t, _)| t)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::TraceOptions;

    fn trace(text: &str) -> InteractionTrace {
        InteractionTrace::parse(
            text,
            &TraceOptions::with_key_pattern("cn:([^,}]*)").unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn single_message_trace_is_one_cluster() {
        let t = trace("{id:7,op:B,user:x}\t{id:7,op:BindRsp,result:Ok}\n");
        let (field, clusters) = cluster_requests(&t, None).unwrap();
        assert_eq!(field, "op");
        assert_eq!(clusters.len(), 1);
        assert_eq!(clusters["B"], vec![0]);
        let a = MessageAnalysis::analyze(&t, &AnalysisConfig::default()).unwrap();
        // Nothing varies across a single request, so every request field is literal.
        assert_eq!(a.request_formats["B"].template(), "{id:7,op:B,user:x}");
        let itype = InteractionType::new("B", "BindRsp");
        assert_eq!(
            a.response_map[&itype].as_ref().unwrap().template(),
            "{id:7,op:BindRsp,result:Ok}"
        );
        assert!(a.equality_rules[&itype].low_confidence());
        assert!(a.equality_rules[&itype].pairs.is_empty());
    }

    #[test]
    fn missing_type_field_errors() {
        let t = trace("{id:1,a:x}\t\n{id:2,b:y}\t\n");
        // Only `id` is shared and it is numeric; the fallback still picks it, so force a miss.
        let err = cluster_requests(&t, Some("op")).unwrap_err();
        assert!(matches!(err, Error::UnknownRequestType(_)));
        let t = trace("{a:1}\t\n{b:2}\t\n");
        assert!(matches!(
            cluster_requests(&t, None),
            Err(Error::NoTypeField)
        ));
    }

    #[test]
    fn no_shared_values_means_no_rules() {
        let t = trace("{id:1,op:P}\t{code:x}\n{id:2,op:P}\t{code:x}\n");
        let a = MessageAnalysis::analyze(&t, &AnalysisConfig::default()).unwrap();
        let itype = InteractionType::new("P", "Rsp");
        assert!(a.equality_rules[&itype].pairs.is_empty());
        assert!(!a.equality_rules[&itype].low_confidence());
    }

    #[test]
    fn type_field_override() {
        let t = trace("{id:1,op:B,kind:x}\t\n{id:2,op:C,kind:y}\t\n{id:3,op:C,kind:y}\t\n");
        let (field, clusters) = cluster_requests(&t, Some("kind")).unwrap();
        assert_eq!(field, "kind");
        assert_eq!(clusters.keys().collect::<Vec<_>>(), ["x", "y"]);
    }

    #[test]
    fn heterogeneous_layouts_are_split() {
        let t = trace(
            "{id:1,op:Q}\t{id:1,v:1}\n{id:2,op:Q}\t{id:2,v:2,w:3}\n{id:3,op:Q}\t{id:3,v:4}\n",
        );
        let a = MessageAnalysis::analyze(&t, &AnalysisConfig::default()).unwrap();
        let labels: Vec<String> = a.interaction_types().map(|t| t.label()).collect();
        assert_eq!(labels, ["Q_Rsp#1", "Q_Rsp#2"]);
        for (i, it) in t.interactions.iter().enumerate() {
            assert_eq!(a.interaction_type_of(it).unwrap(), a.assignments[i]);
        }
    }
}
