use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Edge, NodeId, SocialGraph};
use crate::Hypothesis;

#[derive(Debug, Error, PartialEq)]
pub enum TraceError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("event {index}: {msg}")]
    Invalid { index: usize, msg: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for TraceError {
    fn from(e: std::io::Error) -> Self {
        TraceError::Io(e.to_string())
    }
}

/// One retweet: the edge it travelled over, its class, and the edge that
/// delivered the item to the followee (absent for source-adjacent edges).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceEvent {
    pub edge: Edge,
    pub class: usize,
    pub parent: Option<Edge>,
}

/// A complete propagation trace in generation order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub label: Option<Hypothesis>,
    pub source: NodeId,
    pub events: Vec<TraceEvent>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Checks the generation-order invariants: source-adjacent events have
    /// no parent, every other event names an earlier event delivering to
    /// its followee, and no edge repeats.
    pub fn validate(&self) -> Result<(), TraceError> {
        let mut seen: HashMap<Edge, usize> = HashMap::new();
        for (index, ev) in self.events.iter().enumerate() {
            let invalid = |msg: String| TraceError::Invalid { index, msg };
            match ev.parent {
                None if ev.edge.from != self.source => {
                    return Err(invalid(format!("edge {} has no parent and does not leave the source", ev.edge)))
                }
                None => {}
                Some(p) => {
                    if !seen.contains_key(&p) {
                        return Err(invalid(format!("parent {p} is not an earlier event")));
                    }
                    if p.to != ev.edge.from {
                        return Err(invalid(format!("parent {p} does not deliver to {}", ev.edge.from)));
                    }
                }
            }
            if seen.insert(ev.edge, index).is_some() {
                return Err(invalid(format!("edge {} repeated", ev.edge)));
            }
        }
        Ok(())
    }

    /// Checks that every event edge is present in `graph`.
    pub fn check_graph(&self, graph: &SocialGraph) -> Result<(), TraceError> {
        for (index, ev) in self.events.iter().enumerate() {
            if !graph.has_edge(ev.edge) {
                return Err(TraceError::Invalid {
                    index,
                    msg: format!("edge {} not in graph", ev.edge),
                });
            }
        }
        Ok(())
    }

    /// The full trace as an observation stream, parent pointers dropped.
    pub fn to_stream(&self) -> ObservationStream {
        ObservationStream {
            source: self.source,
            observations: self
                .events
                .iter()
                .map(|e| Observation {
                    edge: e.edge,
                    class: e.class,
                })
                .collect(),
        }
    }
}

/// An observed retweet as seen by the detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Observation {
    pub edge: Edge,
    pub class: usize,
}

/// Partial view of a trace. The first `l` observations form the history
/// available at step `l`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservationStream {
    pub source: NodeId,
    pub observations: Vec<Observation>,
}

impl ObservationStream {
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn validate(&self, num_classes: usize) -> Result<(), TraceError> {
        let mut seen = HashSet::new();
        for (index, o) in self.observations.iter().enumerate() {
            if o.class >= num_classes {
                return Err(TraceError::Invalid {
                    index,
                    msg: format!("class {} out of range for {num_classes} classes", o.class),
                });
            }
            if !seen.insert(o.edge) {
                return Err(TraceError::Invalid {
                    index,
                    msg: format!("edge {} observed twice", o.edge),
                });
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct TraceRecord {
    label: Option<u8>,
    source: NodeId,
    events: Vec<EventRecord>,
}

#[derive(Serialize, Deserialize)]
struct EventRecord {
    u: NodeId,
    v: NodeId,
    class: usize,
    parent: Option<[NodeId; 2]>,
}

/// Writes one JSON record per trace per line.
pub fn write_traces<W: Write>(mut w: W, traces: &[Trace]) -> Result<(), TraceError> {
    for t in traces {
        let rec = TraceRecord {
            label: t.label.map(|h| h.index() as u8),
            source: t.source,
            events: t
                .events
                .iter()
                .map(|e| EventRecord {
                    u: e.edge.from,
                    v: e.edge.to,
                    class: e.class,
                    parent: e.parent.map(|p| [p.from, p.to]),
                })
                .collect(),
        };
        let line = serde_json::to_string(&rec).map_err(|e| TraceError::Io(e.to_string()))?;
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn read_traces<R: BufRead>(r: R) -> Result<Vec<Trace>, TraceError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parse = |msg: String| TraceError::Parse { line: i + 1, msg };
        let rec: TraceRecord = serde_json::from_str(&line).map_err(|e| parse(e.to_string()))?;
        let label = match rec.label {
            None => None,
            Some(l) => Some(Hypothesis::from_index(l as usize).ok_or_else(|| parse(format!("label {l} not in {{0,1}}")))?),
        };
        let trace = Trace {
            label,
            source: rec.source,
            events: rec
                .events
                .into_iter()
                .map(|e| TraceEvent {
                    edge: Edge::new(e.u, e.v),
                    class: e.class,
                    parent: e.parent.map(|[a, b]| Edge::new(a, b)),
                })
                .collect(),
        };
        trace.validate().map_err(|e| parse(e.to_string()))?;
        out.push(trace);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Trace {
        Trace {
            label: Some(Hypothesis::Fake),
            source: 1,
            events: vec![
                TraceEvent {
                    edge: Edge::new(1, 2),
                    class: 3,
                    parent: None,
                },
                TraceEvent {
                    edge: Edge::new(2, 3),
                    class: 1,
                    parent: Some(Edge::new(1, 2)),
                },
            ],
        }
    }

    #[test]
    fn jsonl_format_and_round_trip() {
        let mut buf = Vec::new();
        write_traces(&mut buf, &[sample()]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            text,
            "{\"label\":1,\"source\":1,\"events\":[{\"u\":1,\"v\":2,\"class\":3,\"parent\":null},{\"u\":2,\"v\":3,\"class\":1,\"parent\":[1,2]}]}\n"
        );
        assert_eq!(read_traces(buf.as_slice()).unwrap(), vec![sample()]);
    }

    #[test]
    fn invalid_parent_rejected() {
        let mut t = sample();
        t.events[1].parent = Some(Edge::new(7, 2));
        assert!(t.validate().is_err());
        let mut t = sample();
        t.events[0].edge = Edge::new(5, 2);
        assert!(t.validate().is_err());
    }

    #[test]
    fn bad_label_reports_line() {
        let text = "{\"label\":null,\"source\":1,\"events\":[]}\n{\"label\":3,\"source\":1,\"events\":[]}\n";
        let err = read_traces(text.as_bytes()).unwrap_err();
        assert!(matches!(err, TraceError::Parse { line: 2, .. }));
    }

    #[test]
    fn stream_validation() {
        let s = sample().to_stream();
        assert!(s.validate(4).is_ok());
        assert!(s.validate(3).is_err());
    }
}
