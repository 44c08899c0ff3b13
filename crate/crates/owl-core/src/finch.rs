//! First-neighbor hierarchical clustering.
//!
//! Level 0 links points `i` and `j` whenever `j = nn(i)`, `i = nn(j)`, or
//! `nn(i) = nn(j)` (nearest neighbor, self excluded) and takes connected
//! components as clusters. Later levels repeat the linking on cluster means
//! until a single cluster remains. No parameters beyond the metric.

use alloc::vec;
use alloc::vec::Vec;

/// Distance used for nearest-neighbor queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum NeighborMetric {
    #[default]
    Euclidean,
    Cosine,
}

fn distance(a: &[f64], b: &[f64], metric: NeighborMetric) -> f64 {
    match metric {
        NeighborMetric::Euclidean => a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>(),
        NeighborMetric::Cosine => {
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            let na: f64 = a.iter().map(|x| x * x).sum::<f64>();
            let nb: f64 = b.iter().map(|x| x * x).sum::<f64>();
            if na == 0.0 || nb == 0.0 {
                // Zero vectors are maximally distant from everything.
                return 1.0;
            }
            1.0 - dot / libm::sqrt(na * nb)
        }
    }
}

/// Nearest neighbor of each item, self excluded, ties to the smallest index.
fn nearest_neighbors(items: &[Vec<f64>], metric: NeighborMetric) -> Vec<usize> {
    let n = items.len();
    let mut nn = vec![0usize; n];
    for i in 0..n {
        let mut best = usize::MAX;
        let mut best_dist = f64::INFINITY;
        for j in 0..n {
            if i == j {
                continue;
            }
            let d = distance(&items[i], &items[j], metric);
            if d < best_dist {
                best_dist = d;
                best = j;
            }
        }
        nn[i] = best;
    }
    nn
}

/// First-neighbor graph edges: `(i, nn(i))` for every item plus `(i, j)`
/// pairs sharing a first neighbor, each with its distance.
fn neighbor_edges(items: &[Vec<f64>], metric: NeighborMetric) -> Vec<(usize, usize, f64)> {
    let n = items.len();
    let nn = nearest_neighbors(items, metric);
    let mut edges = Vec::new();
    for i in 0..n {
        edges.push((i, nn[i], distance(&items[i], &items[nn[i]], metric)));
    }
    // Shared first neighbor: group items by their neighbor.
    let mut by_neighbor = vec![Vec::new(); n];
    for i in 0..n {
        by_neighbor[nn[i]].push(i);
    }
    for group in &by_neighbor {
        for (a, &i) in group.iter().enumerate() {
            for &j in &group[a + 1..] {
                edges.push((i, j, distance(&items[i], &items[j], metric)));
            }
        }
    }
    edges
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Smaller root wins so labels stay order-stable.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// One linking pass over the items, optionally refusing links longer than
/// `max_link`. Returns (item -> cluster id, longest link actually used);
/// cluster ids are numbered by first occurrence.
fn link_once(
    items: &[Vec<f64>],
    metric: NeighborMetric,
    max_link: Option<f64>,
) -> (Vec<usize>, f64) {
    let n = items.len();
    let mut uf = UnionFind::new(n);
    let mut longest = 0.0f64;
    for (i, j, dist) in neighbor_edges(items, metric) {
        if max_link.is_some_and(|cap| dist > cap) {
            continue;
        }
        uf.union(i, j);
        longest = longest.max(dist);
    }
    let mut relabel = vec![usize::MAX; n];
    let mut next = 0;
    let mut out = vec![0usize; n];
    for (i, slot) in out.iter_mut().enumerate() {
        let root = uf.find(i);
        if relabel[root] == usize::MAX {
            relabel[root] = next;
            next += 1;
        }
        *slot = relabel[root];
    }
    (out, longest)
}

/// Cluster points into a partition hierarchy, finest first.
///
/// Each element maps point index -> cluster id; the final level has a single
/// cluster. A single point yields one single-cluster partition.
///
/// While merging cluster means, links longer than the longest first-neighbor
/// link of the finest level are refused, so genuinely separated groups merge
/// internally before they merge with each other; once nothing merges under
/// that cap the remaining levels link unrestricted down to one cluster.
pub fn finch_cluster(points: &[Vec<f64>], metric: NeighborMetric) -> Vec<Vec<usize>> {
    assert!(!points.is_empty(), "finch_cluster requires at least one point");
    if points.len() == 1 {
        return vec![vec![0]];
    }

    // point -> current cluster id; starts as the level-0 linking result.
    let (mut assignment, level0_longest) = link_once(points, metric, None);
    let mut cap = Some(level0_longest);
    let mut partitions: Vec<Vec<usize>> = alloc::vec![assignment.clone()];
    loop {
        let clusters = assignment.iter().max().unwrap() + 1;
        if clusters == 1 {
            break;
        }
        // Means of the current clusters over the original points.
        let d = points[0].len();
        let mut sums = vec![vec![0.0; d]; clusters];
        let mut counts = vec![0usize; clusters];
        for (point, &cluster) in points.iter().zip(&assignment) {
            counts[cluster] += 1;
            for (s, v) in sums[cluster].iter_mut().zip(point) {
                *s += v;
            }
        }
        for (sum, &count) in sums.iter_mut().zip(&counts) {
            for s in sum.iter_mut() {
                *s /= count as f64;
            }
        }
        let (mut merged, _) = link_once(&sums, metric, cap);
        if merged.iter().max().unwrap() + 1 == clusters {
            // Nothing merges under the cap: finish unrestricted. An
            // unrestricted pass over >= 2 items always merges something.
            cap = None;
            merged = link_once(&sums, metric, None).0;
        }
        for slot in assignment.iter_mut() {
            *slot = merged[*slot];
        }
        partitions.push(assignment.clone());
    }
    partitions
}

/// The last partition with more than one cluster, or the only partition.
pub fn coarsest_nontrivial(partitions: &[Vec<usize>]) -> &Vec<usize> {
    partitions
        .iter()
        .rev()
        .find(|p| p.iter().max().map(|&m| m + 1).unwrap_or(0) > 1)
        .unwrap_or_else(|| partitions.last().expect("hierarchy is nonempty"))
}

/// Number of clusters in a partition.
pub fn cluster_count(partition: &[usize]) -> usize {
    partition.iter().max().map(|&m| m + 1).unwrap_or(0)
}

/// Group point indices by cluster id.
pub fn members(partition: &[usize]) -> Vec<Vec<usize>> {
    let mut groups = vec![Vec::new(); cluster_count(partition)];
    for (idx, &cluster) in partition.iter().enumerate() {
        groups[cluster].push(idx);
    }
    groups
}
