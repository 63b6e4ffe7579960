//! Interconnection graph: edge `i -> j` whenever `gamma_ij` is nonzero,
//! i.e. node `i` is influenced by node `j`.

use crate::network::GainNetwork;
use crate::scalar::Scalar;

pub const CYCLE_ENUM_LIMIT: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencyMatrix {
    a: Vec<Vec<bool>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SccDecomposition {
    /// Blocks in upper block triangular order: block `k` only receives
    /// edges from blocks `l >= k`.
    pub blocks: Vec<Vec<usize>>,
    /// `perm[k]` is the original index placed at position `k`.
    pub perm: Vec<usize>,
}

/// Simple cycle `(i_1, ..., i_K)` with edges `i_1 -> i_2 -> ... -> i_K -> i_1`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Cycle(pub Vec<usize>);

impl Cycle {
    pub fn is_subordinated(&self) -> bool {
        let (first, rest) = self.0.split_first().expect("nonempty cycle");
        rest.iter().all(|k| k < first)
    }

    /// 1-based rendering such as `(3,1,2)`.
    pub fn display_one_based(&self) -> String {
        let parts: Vec<String> = self.0.iter().map(|k| (k + 1).to_string()).collect();
        format!("({})", parts.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("cycle enumeration limited to n <= {limit}, got n = {n}")]
    TooLarge { n: usize, limit: usize },
}

impl AdjacencyMatrix {
    pub fn from_bools(a: Vec<Vec<bool>>) -> Self {
        let n = a.len();
        assert!(a.iter().all(|r| r.len() == n), "square adjacency matrix");
        let mut a = a;
        for (i, row) in a.iter_mut().enumerate() {
            row[i] = false;
        }
        AdjacencyMatrix { a }
    }

    pub fn from_01(rows: &[Vec<u8>]) -> Self {
        Self::from_bools(rows.iter().map(|r| r.iter().map(|&x| x != 0).collect()).collect())
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.a[i][j]
    }

    pub fn to_01(&self) -> Vec<Vec<u8>> {
        self.a.iter().map(|r| r.iter().map(|&b| b as u8).collect()).collect()
    }

    fn successors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.a[i].iter().enumerate().filter(|(_, &b)| b).map(|(j, _)| j)
    }
}

pub fn adjacency<T: Scalar>(net: &GainNetwork<T>) -> AdjacencyMatrix {
    let n = net.n();
    AdjacencyMatrix::from_bools((0..n).map(|i| (0..n).map(|j| !net.gain(i, j).is_zero()).collect()).collect())
}

/// Strong connectivity; a single node counts as irreducible.
pub fn is_irreducible(adj: &AdjacencyMatrix) -> bool {
    scc_decompose(adj).blocks.len() <= 1
}

pub fn scc_decompose(adj: &AdjacencyMatrix) -> SccDecomposition {
    let n = adj.n();
    let mut t = Tarjan {
        adj,
        index: vec![usize::MAX; n],
        low: vec![0; n],
        on_stack: vec![false; n],
        stack: Vec::new(),
        next: 0,
        out: Vec::new(),
    };
    for v in 0..n {
        if t.index[v] == usize::MAX {
            t.visit(v);
        }
    }
    let mut blocks = t.out;
    blocks.reverse();
    for b in blocks.iter_mut() {
        b.sort_unstable();
    }
    let perm = blocks.iter().flatten().copied().collect();
    SccDecomposition { blocks, perm }
}

struct Tarjan<'a> {
    adj: &'a AdjacencyMatrix,
    index: Vec<usize>,
    low: Vec<usize>,
    on_stack: Vec<bool>,
    stack: Vec<usize>,
    next: usize,
    out: Vec<Vec<usize>>,
}

impl Tarjan<'_> {
    // Recursion depth is bounded by n, which is small for gain networks.
    fn visit(&mut self, v: usize) {
        self.index[v] = self.next;
        self.low[v] = self.next;
        self.next += 1;
        self.stack.push(v);
        self.on_stack[v] = true;
        let succ: Vec<usize> = self.adj.successors(v).collect();
        for w in succ {
            if self.index[w] == usize::MAX {
                self.visit(w);
                self.low[v] = self.low[v].min(self.low[w]);
            } else if self.on_stack[w] {
                self.low[v] = self.low[v].min(self.index[w]);
            }
        }
        if self.low[v] == self.index[v] {
            let mut comp = Vec::new();
            loop {
                let w = self.stack.pop().expect("tarjan stack");
                self.on_stack[w] = false;
                comp.push(w);
                if w == v {
                    break;
                }
            }
            self.out.push(comp);
        }
    }
}

impl SccDecomposition {
    /// Block index of every node.
    pub fn block_of(&self, n: usize) -> Vec<usize> {
        let mut b = vec![0; n];
        for (k, blk) in self.blocks.iter().enumerate() {
            for &i in blk {
                b[i] = k;
            }
        }
        b
    }
}

/// All simple cycles whose first index is the largest, each reported once,
/// sorted by first index, then length, then lexicographically.
pub fn subordinated_cycles(adj: &AdjacencyMatrix) -> Result<Vec<Cycle>, GraphError> {
    let n = adj.n();
    if n > CYCLE_ENUM_LIMIT {
        return Err(GraphError::TooLarge { n, limit: CYCLE_ENUM_LIMIT });
    }
    let mut out = Vec::new();
    for start in 0..n {
        let mut path = vec![start];
        let mut used = vec![false; n];
        used[start] = true;
        extend(adj, start, &mut path, &mut used, &mut out);
    }
    out.sort_by(|a: &Cycle, b: &Cycle| (a.0[0], a.0.len(), &a.0).cmp(&(b.0[0], b.0.len(), &b.0)));
    Ok(out)
}

fn extend(adj: &AdjacencyMatrix, start: usize, path: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Cycle>) {
    let last = *path.last().unwrap();
    for w in adj.successors(last) {
        if w == start && path.len() > 1 {
            out.push(Cycle(path.clone()));
        } else if w < start && !used[w] {
            used[w] = true;
            path.push(w);
            extend(adj, start, path, used, out);
            path.pop();
            used[w] = false;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gain::GainExpr;
    use crate::network::Maf;
    use proptest::prelude::*;

    fn cyc(v: &[usize]) -> Cycle {
        Cycle(v.iter().map(|k| k - 1).collect())
    }

    #[test]
    fn adjacency_examples() {
        let net = GainNetwork::<f64>::from_slopes(&[vec![0.0, 1.0], vec![0.0, 0.0]], Maf::Sum).unwrap();
        assert_eq!(adjacency(&net).to_01(), vec![vec![0, 1], vec![0, 0]]);
        let net = GainNetwork::<f64>::from_slopes(&[vec![0.0; 2], vec![0.0; 2]], Maf::Sum).unwrap();
        assert_eq!(adjacency(&net).to_01(), vec![vec![0, 0], vec![0, 0]]);
        let net = GainNetwork::<f64>::uniform(3, GainExpr::linear(1.0), Maf::Max).unwrap();
        assert_eq!(adjacency(&net).to_01(), vec![vec![0, 1, 1], vec![1, 0, 1], vec![1, 1, 0]]);
    }

    #[test]
    fn irreducibility_examples() {
        assert!(is_irreducible(&AdjacencyMatrix::from_01(&[vec![0, 1], vec![1, 0]])));
        assert!(!is_irreducible(&AdjacencyMatrix::from_01(&[vec![0, 1], vec![0, 0]])));
        assert!(is_irreducible(&AdjacencyMatrix::from_01(&[vec![0]])));
    }

    #[test]
    fn scc_examples() {
        let d = scc_decompose(&AdjacencyMatrix::from_01(&[vec![0, 1], vec![0, 0]]));
        assert_eq!(d.blocks, vec![vec![0], vec![1]]);
        assert_eq!(d.perm, vec![0, 1]);
        let d = scc_decompose(&AdjacencyMatrix::from_01(&[vec![0, 1], vec![1, 0]]));
        assert_eq!(d.blocks, vec![vec![0, 1]]);
        // 1 <-> 2, node 3 feeds node 1
        let adj = AdjacencyMatrix::from_01(&[vec![0, 1, 1], vec![1, 0, 0], vec![0, 0, 0]]);
        let d = scc_decompose(&adj);
        assert_eq!(d.blocks, vec![vec![0, 1], vec![2]]);
        assert_upper_block_triangular(&adj, &d);
    }

    fn assert_upper_block_triangular(adj: &AdjacencyMatrix, d: &SccDecomposition) {
        let b = d.block_of(adj.n());
        for i in 0..adj.n() {
            for j in 0..adj.n() {
                if adj.get(i, j) {
                    assert!(b[i] <= b[j], "edge {i}->{j} goes upstream");
                }
            }
        }
    }

    #[test]
    fn cycle_examples() {
        let two = AdjacencyMatrix::from_01(&[vec![0, 1], vec![1, 0]]);
        assert_eq!(subordinated_cycles(&two).unwrap(), vec![cyc(&[2, 1])]);
        let full = AdjacencyMatrix::from_01(&[vec![0, 1, 1], vec![1, 0, 1], vec![1, 1, 0]]);
        assert_eq!(
            subordinated_cycles(&full).unwrap(),
            vec![cyc(&[2, 1]), cyc(&[3, 1]), cyc(&[3, 2]), cyc(&[3, 1, 2]), cyc(&[3, 2, 1])]
        );
        let tri = AdjacencyMatrix::from_01(&[vec![0, 1, 0], vec![0, 0, 1], vec![1, 0, 0]]);
        assert_eq!(subordinated_cycles(&tri).unwrap(), vec![cyc(&[3, 1, 2])]);
        assert!(cyc(&[3, 1, 2]).is_subordinated());
        assert_eq!(cyc(&[3, 1, 2]).display_one_based(), "(3,1,2)");
    }

    #[test]
    fn cycle_limit() {
        let adj = AdjacencyMatrix::from_bools(vec![vec![true; 13]; 13]);
        assert_eq!(subordinated_cycles(&adj), Err(GraphError::TooLarge { n: 13, limit: 12 }));
    }

    /// Counts simple cycles by trying every ordered tuple of distinct nodes.
    fn brute_force_count(adj: &AdjacencyMatrix) -> usize {
        fn rec(adj: &AdjacencyMatrix, path: &mut Vec<usize>, count: &mut usize) {
            let n = adj.n();
            let first = path[0];
            if path.len() >= 2 && adj.get(*path.last().unwrap(), first) {
                *count += 1;
            }
            for w in 0..n {
                if w < first && !path.contains(&w) {
                    path.push(w);
                    let ok = adj.get(path[path.len() - 2], w);
                    if ok {
                        rec(adj, path, count);
                    }
                    path.pop();
                }
            }
        }
        let mut count = 0;
        for s in 0..adj.n() {
            rec(adj, &mut vec![s], &mut count);
        }
        count
    }

    fn arb_adj() -> impl Strategy<Value = AdjacencyMatrix> {
        (1usize..=6).prop_flat_map(|n| {
            prop::collection::vec(prop::collection::vec(prop::bool::weighted(0.45), n), n)
                .prop_map(AdjacencyMatrix::from_bools)
        })
    }

    proptest! {
        #[test]
        fn cycle_count_matches_brute_force(adj in arb_adj()) {
            let cycles = subordinated_cycles(&adj).unwrap();
            prop_assert_eq!(cycles.len(), brute_force_count(&adj));
            for c in &cycles {
                prop_assert!(c.is_subordinated());
                for k in 0..c.0.len() {
                    prop_assert!(adj.get(c.0[k], c.0[(k + 1) % c.0.len()]));
                }
            }
        }

        #[test]
        fn scc_partitions_and_triangularises(adj in arb_adj()) {
            let d = scc_decompose(&adj);
            let mut all = d.perm.clone();
            all.sort_unstable();
            prop_assert_eq!(all, (0..adj.n()).collect::<Vec<_>>());
            assert_upper_block_triangular(&adj, &d);
            for b in &d.blocks {
                let sub = AdjacencyMatrix::from_bools(
                    b.iter().map(|&i| b.iter().map(|&j| adj.get(i, j)).collect()).collect(),
                );
                prop_assert_eq!(scc_decompose(&sub).blocks.len(), 1);
            }
            prop_assert_eq!(is_irreducible(&adj), d.blocks.len() == 1);
        }
    }
}
