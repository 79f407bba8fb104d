/// Disjoint-set forest with path compression and union by rank.
///
/// Each root also carries a caller-defined label (the identity of the
/// component it represents), so merges can choose which identity survives
/// independently of the rank heuristic.
#[derive(Clone, Debug)]
pub struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
    label: Vec<usize>,
}

impl DisjointSet {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
            label: (0..n).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn find(&mut self, mut node: usize) -> usize {
        let mut root = node;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        while self.parent[node] != node {
            let next = self.parent[node];
            self.parent[node] = root;
            node = next;
        }
        root
    }

    /// Label of the set containing `node`.
    pub fn label_of(&mut self, node: usize) -> usize {
        let root = self.find(node);
        self.label[root]
    }

    pub fn set_label(&mut self, node: usize, label: usize) {
        let root = self.find(node);
        self.label[root] = label;
    }

    /// Merges the sets of `a` and `b`; the merged set takes `label`.
    /// Returns the new root, or `None` if they were already joined.
    pub fn union_labeled(&mut self, a: usize, b: usize, label: usize) -> Option<usize> {
        let mut ra = self.find(a);
        let mut rb = self.find(b);
        if ra == rb {
            return None;
        }
        if self.rank[ra] < self.rank[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        if self.rank[ra] == self.rank[rb] {
            self.rank[ra] = self.rank[ra].saturating_add(1);
        }
        self.label[ra] = label;
        Some(ra)
    }

    pub fn same(&mut self, a: usize, b: usize) -> bool {
        self.find(a) == self.find(b)
    }
}
