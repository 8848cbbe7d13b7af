//! Bipartite instances: model, document format, generators and the offline
//! optimum.
//!
//! Offline vertices are identified by strings in documents and by their
//! dense index (position in [`Instance::offline`]) everywhere else. Index
//! order is also the "lexicographic" order used for tie-breaking.

use std::collections::HashMap;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest `k` accepted by [`gen_tri_recursive`]. The instance has
/// roughly `1.8 * 3^(2k-1)` edges, so `k = 7` is already ~2.9M edges.
pub const TRI_RECURSIVE_MAX_K: u32 = 7;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum InstanceError {
    #[error("malformed document: {0}")]
    Malformed(String),
    #[error("duplicate offline id {id:?} at offline[{index}]")]
    DuplicateOffline { id: String, index: usize },
    #[error("duplicate online id {id:?} at arrivals[{index}]")]
    DuplicateOnline { id: String, index: usize },
    #[error("unknown offline id {id:?} at arrivals[{arrival}].neighbors[{position}]")]
    UnknownOffline {
        id: String,
        arrival: usize,
        position: usize,
    },
    #[error("duplicate neighbor {id:?} at arrivals[{arrival}].neighbors[{position}]")]
    DuplicateNeighbor {
        id: String,
        arrival: usize,
        position: usize,
    },
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
}

/// One online vertex with its offline neighbors (dense indices).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Arrival {
    pub id: String,
    pub neighbors: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub name: String,
    pub offline: Vec<String>,
    pub arrivals: Vec<Arrival>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceDoc {
    name: String,
    offline: Vec<String>,
    arrivals: Vec<ArrivalDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArrivalDoc {
    id: String,
    neighbors: Vec<String>,
}

impl Instance {
    /// Builds a validated instance from string ids.
    pub fn new<S, T>(
        name: impl Into<String>,
        offline: Vec<S>,
        arrivals: Vec<(T, Vec<S>)>,
    ) -> Result<Self, InstanceError>
    where
        S: Into<String>,
        T: Into<String>,
    {
        let offline: Vec<String> = offline.into_iter().map(Into::into).collect();
        let mut index = HashMap::with_capacity(offline.len());
        for (i, id) in offline.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(InstanceError::DuplicateOffline {
                    id: id.clone(),
                    index: i,
                });
            }
        }
        let mut seen_online = HashMap::with_capacity(arrivals.len());
        let mut out = Vec::with_capacity(arrivals.len());
        for (a, (id, neighbors)) in arrivals.into_iter().enumerate() {
            let id: String = id.into();
            if seen_online.insert(id.clone(), a).is_some() {
                return Err(InstanceError::DuplicateOnline { id, index: a });
            }
            let mut nbrs = Vec::with_capacity(neighbors.len());
            let mut local = std::collections::HashSet::with_capacity(neighbors.len());
            for (p, n) in neighbors.into_iter().enumerate() {
                let n: String = n.into();
                let Some(&i) = index.get(&n) else {
                    return Err(InstanceError::UnknownOffline {
                        id: n,
                        arrival: a,
                        position: p,
                    });
                };
                if !local.insert(i) {
                    return Err(InstanceError::DuplicateNeighbor {
                        id: n,
                        arrival: a,
                        position: p,
                    });
                }
                nbrs.push(i);
            }
            out.push(Arrival {
                id,
                neighbors: nbrs,
            });
        }
        Ok(Self {
            name: name.into(),
            offline,
            arrivals: out,
        })
    }

    pub fn n_offline(&self) -> usize {
        self.offline.len()
    }

    pub fn n_online(&self) -> usize {
        self.arrivals.len()
    }

    pub fn edge_count(&self) -> usize {
        self.arrivals.iter().map(|a| a.neighbors.len()).sum()
    }

    /// Instance restricted to the first `len` arrivals.
    pub fn prefix(&self, len: usize) -> Instance {
        Instance {
            name: self.name.clone(),
            offline: self.offline.clone(),
            arrivals: self.arrivals[..len.min(self.arrivals.len())].to_vec(),
        }
    }

    /// Position of an offline id, if present.
    pub fn offline_index(&self, id: &str) -> Option<usize> {
        self.offline.iter().position(|o| o == id)
    }
}

/// Parses an instance document.
pub fn parse_instance(text: &str) -> Result<Instance, InstanceError> {
    let doc: InstanceDoc =
        serde_json::from_str(text).map_err(|e| InstanceError::Malformed(e.to_string()))?;
    Instance::new(
        doc.name,
        doc.offline,
        doc.arrivals
            .into_iter()
            .map(|a| (a.id, a.neighbors))
            .collect(),
    )
}

/// Canonical document: two-space indented JSON, fields in schema order,
/// LF line endings and a trailing newline.
pub fn serialize_instance(inst: &Instance) -> String {
    let doc = InstanceDoc {
        name: inst.name.clone(),
        offline: inst.offline.clone(),
        arrivals: inst
            .arrivals
            .iter()
            .map(|a| ArrivalDoc {
                id: a.id.clone(),
                neighbors: a
                    .neighbors
                    .iter()
                    .map(|&i| inst.offline[i].clone())
                    .collect(),
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("instance documents always serialize");
    s.push('\n');
    s
}

fn numeric_ids(n: usize) -> Vec<String> {
    (1..=n).map(|i| i.to_string()).collect()
}

/// Recursive upper-bound instance for two-choice greedy with `n = 3^k`.
///
/// Block `i < k` has `2^i * 3^(k-i-1)` arrivals, each adjacent to the last
/// `2^i * 3^(k-i)` offline vertices. A final block of `2^k` arrivals
/// completes the perfect matching on the last `2^k` offline vertices.
pub fn gen_tri_recursive(k: u32) -> Result<Instance, InstanceError> {
    if k == 0 || k > TRI_RECURSIVE_MAX_K {
        return Err(InstanceError::OutOfRange(format!(
            "k must be in 1..={TRI_RECURSIVE_MAX_K}, got {k}"
        )));
    }
    let n = 3usize.pow(k);
    let offline = numeric_ids(n);
    let mut arrivals = Vec::with_capacity(n);
    let mut next_online = 1usize;
    for i in 0..k {
        let block = 2usize.pow(i) * 3usize.pow(k - i - 1);
        let width = 2usize.pow(i) * 3usize.pow(k - i);
        let neighbors: Vec<usize> = (n - width..n).collect();
        for _ in 0..block {
            arrivals.push(Arrival {
                id: next_online.to_string(),
                neighbors: neighbors.clone(),
            });
            next_online += 1;
        }
    }
    let tail = 2usize.pow(k);
    for t in 0..tail {
        arrivals.push(Arrival {
            id: next_online.to_string(),
            neighbors: vec![n - tail + t],
        });
        next_online += 1;
    }
    Ok(Instance {
        name: format!("tri-recursive-k{k}"),
        offline,
        arrivals,
    })
}

/// The 9x9 instance on which perfect negative correlation achieves 5/9.
pub fn gen_five_ninths() -> Instance {
    let offline: Vec<String> = (1..=9).map(|i| format!("i{i}")).collect();
    let mut arrivals = Vec::with_capacity(9);
    for j in 1..=3 {
        arrivals.push(Arrival {
            id: format!("j{j}"),
            neighbors: (0..9).collect(),
        });
    }
    for j in 4..=5 {
        arrivals.push(Arrival {
            id: format!("j{j}"),
            neighbors: (3..9).collect(),
        });
    }
    for j in 6..=9 {
        arrivals.push(Arrival {
            id: format!("j{j}"),
            neighbors: vec![j - 1],
        });
    }
    Instance {
        name: "five-ninths".into(),
        offline,
        arrivals,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InfeasibilityVariant {
    /// Third arrival adjacent to offline 1 and 3.
    A,
    /// Third arrival adjacent to offline 1 and 4.
    B,
}

/// Four offline vertices, arrivals 5: {1,2}, 6: {3,4}, 7: {1,3} or {1,4}.
pub fn gen_infeasibility(variant: InfeasibilityVariant) -> Instance {
    let last = match variant {
        InfeasibilityVariant::A => vec![0, 2],
        InfeasibilityVariant::B => vec![0, 3],
    };
    let name = match variant {
        InfeasibilityVariant::A => "infeasible-a",
        InfeasibilityVariant::B => "infeasible-b",
    };
    Instance {
        name: name.into(),
        offline: numeric_ids(4),
        arrivals: vec![
            Arrival {
                id: "5".into(),
                neighbors: vec![0, 1],
            },
            Arrival {
                id: "6".into(),
                neighbors: vec![2, 3],
            },
            Arrival {
                id: "7".into(),
                neighbors: last,
            },
        ],
    }
}

/// Random instance where each arrival gets `degree` distinct neighbors
/// sampled uniformly without replacement.
pub fn gen_random(
    n_offline: usize,
    n_online: usize,
    degree: usize,
    seed: u64,
) -> Result<Instance, InstanceError> {
    if degree > n_offline {
        return Err(InstanceError::OutOfRange(format!(
            "degree {degree} exceeds offline count {n_offline}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let arrivals = (1..=n_online)
        .map(|j| {
            let mut neighbors = sample(&mut rng, n_offline, degree).into_vec();
            neighbors.sort_unstable();
            Arrival {
                id: j.to_string(),
                neighbors,
            }
        })
        .collect();
    Ok(Instance {
        name: format!("random-n{n_offline}-m{n_online}-d{degree}-s{seed}"),
        offline: numeric_ids(n_offline),
        arrivals,
    })
}

/// Maximum cardinality matching size via augmenting paths (Kuhn).
pub fn optimal_matching_size(inst: &Instance) -> usize {
    let n = inst.n_offline();
    let mut owner: Vec<Option<usize>> = vec![None; n];
    let mut size = 0;
    let mut visited = vec![0usize; n];
    for j in 0..inst.n_online() {
        if try_augment(inst, j, &mut owner, &mut visited, j + 1) {
            size += 1;
        }
    }
    size
}

fn try_augment(
    inst: &Instance,
    start: usize,
    owner: &mut [Option<usize>],
    visited: &mut [usize],
    stamp: usize,
) -> bool {
    // Iterative DFS; the recursive form overflows the stack on the larger
    // generated instances.
    let mut stack: Vec<(usize, usize)> = vec![(start, 0)];
    let mut path: Vec<usize> = Vec::new();
    while let Some(&mut (j, ref mut pos)) = stack.last_mut() {
        let nbrs = &inst.arrivals[j].neighbors;
        if *pos >= nbrs.len() {
            stack.pop();
            path.pop();
            continue;
        }
        let i = nbrs[*pos];
        *pos += 1;
        if visited[i] == stamp {
            continue;
        }
        visited[i] = stamp;
        match owner[i] {
            None => {
                path.push(i);
                // Flip along the path: stack[d].0 takes path[d].
                for (d, &(jj, _)) in stack.iter().enumerate() {
                    owner[path[d]] = Some(jj);
                }
                return true;
            }
            Some(other) => {
                path.push(i);
                stack.push((other, 0));
            }
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_doc() -> &'static str {
        r#"{"name":"m","offline":["a","b"],"arrivals":[{"id":"j1","neighbors":["a","b"]}]}"#
    }

    #[test]
    fn parse_minimal() {
        let inst = parse_instance(minimal_doc()).unwrap();
        assert_eq!(inst.n_offline(), 2);
        assert_eq!(inst.n_online(), 1);
        assert_eq!(inst.arrivals[0].neighbors, vec![0, 1]);
    }

    #[test]
    fn unknown_neighbor_is_reported_with_location() {
        let doc = r#"{"name":"m","offline":["a"],"arrivals":[{"id":"j1","neighbors":["a","z"]}]}"#;
        let err = parse_instance(doc).unwrap_err();
        assert_eq!(
            err,
            InstanceError::UnknownOffline {
                id: "z".into(),
                arrival: 0,
                position: 1
            }
        );
        assert!(err.to_string().contains("unknown offline id"));
    }

    #[test]
    fn duplicates_rejected() {
        let doc = r#"{"name":"m","offline":["a","a"],"arrivals":[]}"#;
        assert!(matches!(
            parse_instance(doc),
            Err(InstanceError::DuplicateOffline { index: 1, .. })
        ));
        let doc = r#"{"name":"m","offline":["a"],"arrivals":[{"id":"x","neighbors":[]},{"id":"x","neighbors":[]}]}"#;
        assert!(matches!(
            parse_instance(doc),
            Err(InstanceError::DuplicateOnline { index: 1, .. })
        ));
        let doc = r#"{"name":"m","offline":["a"],"arrivals":[{"id":"x","neighbors":["a","a"]}]}"#;
        assert!(matches!(
            parse_instance(doc),
            Err(InstanceError::DuplicateNeighbor { position: 1, .. })
        ));
    }

    #[test]
    fn malformed_documents() {
        for doc in [
            "",
            "{",
            r#"{"name":"m"}"#,
            r#"{"name":"m","offline":[1],"arrivals":[]}"#,
        ] {
            let err = parse_instance(doc).unwrap_err();
            assert!(matches!(err, InstanceError::Malformed(_)), "{doc}: {err}");
        }
        // serde_json reports line/column for syntax errors
        let err = parse_instance("{\n  \"name\": }").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn empty_neighbor_list_is_legal() {
        let doc = r#"{"name":"m","offline":["a"],"arrivals":[{"id":"x","neighbors":[]}]}"#;
        let inst = parse_instance(doc).unwrap();
        assert!(inst.arrivals[0].neighbors.is_empty());
        assert_eq!(optimal_matching_size(&inst), 0);
    }

    #[test]
    fn canonical_serialization() {
        let inst = Instance::new("one", vec!["a"], vec![("j", vec!["a"])]).unwrap();
        let s = serialize_instance(&inst);
        assert_eq!(
            s,
            "{\n  \"name\": \"one\",\n  \"offline\": [\n    \"a\"\n  ],\n  \"arrivals\": [\n    {\n      \"id\": \"j\",\n      \"neighbors\": [\n        \"a\"\n      ]\n    }\n  ]\n}\n"
        );
        assert_eq!(parse_instance(&s).unwrap(), inst);
    }

    #[test]
    fn tri_recursive_k1() {
        let inst = gen_tri_recursive(1).unwrap();
        assert_eq!(inst.n_offline(), 3);
        let nbrs: Vec<Vec<usize>> = inst.arrivals.iter().map(|a| a.neighbors.clone()).collect();
        assert_eq!(nbrs, vec![vec![0, 1, 2], vec![1], vec![2]]);
    }

    #[test]
    fn tri_recursive_block_sizes() {
        for k in 1..=5u32 {
            let inst = gen_tri_recursive(k).unwrap();
            let n = 3usize.pow(k);
            assert_eq!(inst.n_offline(), n);
            assert_eq!(inst.n_online(), n);
            let mut pos = 0;
            for i in 0..k {
                let block = 2usize.pow(i) * 3usize.pow(k - i - 1);
                let width = 2usize.pow(i) * 3usize.pow(k - i);
                for a in &inst.arrivals[pos..pos + block] {
                    assert_eq!(a.neighbors, (n - width..n).collect::<Vec<_>>());
                }
                pos += block;
            }
            assert_eq!(n - pos, 2usize.pow(k));
            for a in &inst.arrivals[pos..] {
                assert_eq!(a.neighbors.len(), 1);
            }
        }
        let k2 = gen_tri_recursive(2).unwrap();
        let sizes: Vec<usize> = k2.arrivals.iter().map(|a| a.neighbors.len()).collect();
        assert_eq!(sizes, vec![9, 9, 9, 6, 6, 1, 1, 1, 1]);
    }

    #[test]
    fn tri_recursive_range() {
        assert!(gen_tri_recursive(0).is_err());
        assert!(gen_tri_recursive(TRI_RECURSIVE_MAX_K + 1).is_err());
    }

    #[test]
    fn tri_recursive_has_perfect_matching() {
        for k in 1..=3 {
            assert_eq!(
                optimal_matching_size(&gen_tri_recursive(k).unwrap()),
                3usize.pow(k)
            );
        }
    }

    #[test]
    fn five_ninths_shape() {
        let inst = gen_five_ninths();
        assert_eq!(inst.n_offline(), 9);
        assert_eq!(inst.n_online(), 9);
        let j4: Vec<&str> = inst.arrivals[3]
            .neighbors
            .iter()
            .map(|&i| inst.offline[i].as_str())
            .collect();
        assert_eq!(j4, vec!["i4", "i5", "i6", "i7", "i8", "i9"]);
        assert_eq!(optimal_matching_size(&inst), 9);
    }

    #[test]
    fn infeasibility_variants() {
        let a = gen_infeasibility(InfeasibilityVariant::A);
        let b = gen_infeasibility(InfeasibilityVariant::B);
        let ids = |inst: &Instance| -> Vec<String> {
            inst.arrivals[2]
                .neighbors
                .iter()
                .map(|&i| inst.offline[i].clone())
                .collect()
        };
        assert_eq!(ids(&a), vec!["1", "3"]);
        assert_eq!(ids(&b), vec!["1", "4"]);
        assert_eq!(optimal_matching_size(&a), 3);
        assert_eq!(optimal_matching_size(&b), 3);
    }

    #[test]
    fn random_is_deterministic_and_saturates() {
        assert_eq!(
            gen_random(6, 5, 3, 9).unwrap(),
            gen_random(6, 5, 3, 9).unwrap()
        );
        assert_ne!(
            gen_random(6, 5, 3, 9).unwrap(),
            gen_random(6, 5, 3, 10).unwrap()
        );
        let full = gen_random(4, 6, 4, 1).unwrap();
        assert!(full
            .arrivals
            .iter()
            .all(|a| a.neighbors == vec![0, 1, 2, 3]));
        let two = gen_random(2, 3, 2, 5).unwrap();
        assert!(two.arrivals.iter().all(|a| a.neighbors == vec![0, 1]));
        assert!(gen_random(2, 3, 3, 5).is_err());
    }

    #[test]
    fn no_edges_means_zero() {
        let inst = Instance::new("e", vec!["a", "b"], vec![("x", vec![]), ("y", vec![])]).unwrap();
        assert_eq!(optimal_matching_size(&inst), 0);
    }
}
