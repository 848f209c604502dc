use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::{FloorPlan, WorldError};

/// Room connectivity: one node per room, one undirected edge per connected
/// pair. Edges are stored with the smaller id first and sorted.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopologicalMap {
    pub edges: Vec<[String; 2]>,
    pub nodes: Vec<String>,
}

impl TopologicalMap {
    pub fn new(nodes: impl IntoIterator<Item = String>, edges: impl IntoIterator<Item = (String, String)>) -> Self {
        let nodes: BTreeSet<String> = nodes.into_iter().collect();
        let edges: BTreeSet<[String; 2]> = edges
            .into_iter()
            .filter(|(a, b)| a != b)
            .map(|(a, b)| if a <= b { [a, b] } else { [b, a] })
            .collect();
        TopologicalMap {
            edges: edges.into_iter().collect(),
            nodes: nodes.into_iter().collect(),
        }
    }

    pub fn neighbors(&self, room: &str) -> Vec<&str> {
        let mut out: Vec<&str> = self
            .edges
            .iter()
            .filter_map(|[a, b]| {
                if a == room {
                    Some(b.as_str())
                } else if b == room {
                    Some(a.as_str())
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out
    }

    pub fn contains(&self, room: &str) -> bool {
        self.nodes.iter().any(|n| n == room)
    }

    /// `{"edges":[[a,b],...],"nodes":[...]}` with keys and entries sorted.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("map serializes")
    }
}

pub fn topological_map_of(plan: &FloorPlan) -> TopologicalMap {
    TopologicalMap::new(
        plan.rooms.iter().map(|r| r.id.clone()),
        plan.doors
            .iter()
            .map(|d| (d.rooms[0].clone(), d.rooms[1].clone())),
    )
}

/// Shortest room sequence from `from` to `to`, endpoints included. Among
/// equally short routes the lexicographically smallest id sequence wins.
pub fn room_path(map: &TopologicalMap, from: &str, to: &str) -> Result<Vec<String>, WorldError> {
    for r in [from, to] {
        if !map.contains(r) {
            return Err(WorldError::UnknownRoom(r.to_string()));
        }
    }
    // BFS visiting neighbors in sorted order: the first parent to reach a
    // node lies on the lexicographically smallest shortest path.
    let mut parent: BTreeMap<&str, &str> = BTreeMap::new();
    let mut seen = BTreeSet::from([from]);
    let mut queue = VecDeque::from([from]);
    while let Some(cur) = queue.pop_front() {
        if cur == to {
            break;
        }
        for n in map.neighbors(cur) {
            if seen.insert(n) {
                parent.insert(n, cur);
                queue.push_back(n);
            }
        }
    }
    if !seen.contains(to) {
        return Err(WorldError::NoPath {
            from: from.to_string(),
            to: to.to_string(),
        });
    }
    let mut path = vec![to.to_string()];
    let mut cur = to;
    while cur != from {
        cur = parent[cur];
        path.push(cur.to_string());
    }
    path.reverse();
    Ok(path)
}
