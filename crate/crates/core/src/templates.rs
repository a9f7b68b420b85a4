//! The PQC template catalog: every CNOT placement sequence up to depth `K`
//! on a set of qubit topologies, numbered breadth-first.
//!
//! A template with edges `[e_1, ..., e_d]` is the circuit
//! `U3 on every qubit`, then for each edge `CNOT(e) ; U3(lo) ; U3(hi)`.
//! Its parent drops the last edge, so parent skeletons are strict gate
//! prefixes of their children.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Gate, QubitTopology};
use crate::error::{Error, Result};

pub type Edge = (usize, usize);

/// Max identical consecutive CNOT edges; three CNOTs cover any two-qubit unitary.
pub const DEFAULT_CONSECUTIVE_LIMIT: usize = 3;

/// Max CNOTs in the default three-qubit catalog.
pub const DEFAULT_K: usize = 8;

#[derive(Debug, Clone)]
pub struct Template {
    pub id: usize,
    /// Index of the first declared topology containing every edge.
    pub topology: usize,
    pub cnot_edges: Vec<Edge>,
    pub skeleton: Circuit,
}

impl Template {
    pub fn cnot_count(&self) -> usize {
        self.cnot_edges.len()
    }
}

/// Fresh skeleton for a CNOT edge sequence. CNOT control is the lower qubit.
pub fn skeleton(n_qubits: usize, edges: &[Edge]) -> Result<Circuit> {
    let mut c = Circuit::new(n_qubits);
    for q in 0..n_qubits {
        c.push_gate(Gate::U3 { qubit: q })?;
    }
    for &(a, b) in edges {
        let (lo, hi) = (a.min(b), a.max(b));
        c.push_cnot(lo, hi)?;
        c.push_gate(Gate::U3 { qubit: lo })?;
        c.push_gate(Gate::U3 { qubit: hi })?;
    }
    Ok(c)
}

#[derive(Debug, Clone)]
pub struct TemplateCatalog {
    n_qubits: usize,
    k: usize,
    consecutive_limit: usize,
    topologies: Vec<QubitTopology>,
    templates: Vec<Template>,
    index: HashMap<Vec<Edge>, usize>,
    parents: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    /// Topology tags each template fits in.
    compatible: Vec<Vec<usize>>,
}

/// The three vertex labelings of the three-qubit line: 0–1–2, 0–2–1, 1–0–2.
pub fn three_qubit_lines() -> Vec<QubitTopology> {
    [[0, 1, 2], [0, 2, 1], [1, 0, 2]]
        .iter()
        .map(|order| QubitTopology::line(order).expect("valid line"))
        .collect()
}

/// Default topology set for an `n`-qubit catalog (`n ≤ 3`).
pub fn default_topologies(n_qubits: usize) -> Vec<QubitTopology> {
    match n_qubits {
        3 => three_qubit_lines(),
        n => vec![QubitTopology::line(&(0..n).collect::<Vec<_>>()).expect("valid line")],
    }
}

fn runs_ok(seq: &[Edge], limit: usize) -> bool {
    let mut run = 0;
    for (i, e) in seq.iter().enumerate() {
        run = if i > 0 && seq[i - 1] == *e { run + 1 } else { 1 };
        if run > limit {
            return false;
        }
    }
    true
}

/// Lexicographic sequences of `depth` edges with runs no longer than `limit`.
fn sequences(edges: &[Edge], depth: usize, limit: usize, out: &mut Vec<Vec<Edge>>) {
    fn rec(edges: &[Edge], depth: usize, limit: usize, cur: &mut Vec<Edge>, out: &mut Vec<Vec<Edge>>) {
        if cur.len() == depth {
            out.push(cur.clone());
            return;
        }
        for &e in edges {
            cur.push(e);
            if runs_ok(&cur[cur.len().saturating_sub(limit + 1)..], limit) {
                rec(edges, depth, limit, cur, out);
            }
            cur.pop();
        }
    }
    rec(edges, depth, limit, &mut Vec::new(), out);
}

pub fn enumerate(
    n_qubits: usize,
    k: usize,
    topologies: &[QubitTopology],
    consecutive_limit: usize,
) -> Result<TemplateCatalog> {
    if topologies.is_empty() {
        return Err(Error::InvalidArgument("empty topology set".into()));
    }
    if consecutive_limit == 0 {
        return Err(Error::InvalidArgument("consecutive limit must be positive".into()));
    }
    if let Some(t) = topologies.iter().find(|t| t.n_qubits() != n_qubits) {
        return Err(Error::Dimension(format!(
            "{}-qubit topology in a {n_qubits}-qubit catalog",
            t.n_qubits()
        )));
    }

    let mut templates: Vec<Template> = Vec::new();
    let mut index: HashMap<Vec<Edge>, usize> = HashMap::new();
    let mut add = |seq: Vec<Edge>, tag: usize, templates: &mut Vec<Template>| -> Result<()> {
        if index.contains_key(&seq) {
            return Ok(());
        }
        let id = templates.len();
        index.insert(seq.clone(), id);
        templates.push(Template {
            id,
            topology: tag,
            skeleton: skeleton(n_qubits, &seq)?,
            cnot_edges: seq,
        });
        Ok(())
    };

    add(Vec::new(), 0, &mut templates)?;
    for depth in 1..=k {
        for (tag, topo) in topologies.iter().enumerate() {
            let edges: Vec<Edge> = topo.edges().collect();
            let mut seqs = Vec::new();
            sequences(&edges, depth, consecutive_limit, &mut seqs);
            for seq in seqs {
                add(seq, tag, &mut templates)?;
            }
        }
    }
    drop(add);

    let mut parents = vec![None; templates.len()];
    let mut children = vec![Vec::new(); templates.len()];
    for t in templates.iter().skip(1) {
        let prefix = &t.cnot_edges[..t.cnot_edges.len() - 1];
        let p = index[prefix];
        parents[t.id] = Some(p);
        children[p].push(t.id);
    }
    let compatible = templates
        .iter()
        .map(|t| {
            topologies
                .iter()
                .enumerate()
                .filter(|(_, topo)| t.cnot_edges.iter().all(|&(a, b)| topo.contains(a, b)))
                .map(|(i, _)| i)
                .collect()
        })
        .collect();

    Ok(TemplateCatalog {
        n_qubits,
        k,
        consecutive_limit,
        topologies: topologies.to_vec(),
        templates,
        index,
        parents,
        children,
        compatible,
    })
}

impl TemplateCatalog {
    /// Catalog over `default_topologies(n_qubits)` with the default run limit.
    pub fn standard(n_qubits: usize, k: usize) -> Result<Self> {
        enumerate(n_qubits, k, &default_topologies(n_qubits), DEFAULT_CONSECUTIVE_LIMIT)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn consecutive_limit(&self) -> usize {
        self.consecutive_limit
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn topologies(&self) -> &[QubitTopology] {
        &self.topologies
    }

    pub fn templates(&self) -> &[Template] {
        &self.templates
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn get(&self, id: usize) -> Result<&Template> {
        self.templates.get(id).ok_or(Error::UnknownTemplate(id))
    }

    pub fn lookup(&self, edges: &[Edge]) -> Option<usize> {
        let normalized: Vec<Edge> = edges.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
        self.index.get(&normalized).copied()
    }

    pub fn children(&self, id: usize) -> Result<&[usize]> {
        self.get(id)?;
        Ok(&self.children[id])
    }

    pub fn parent(&self, id: usize) -> Result<Option<usize>> {
        self.get(id)?;
        Ok(self.parents[id])
    }

    pub fn compatible_tags(&self, id: usize) -> Result<&[usize]> {
        self.get(id)?;
        Ok(&self.compatible[id])
    }

    pub fn is_compatible(&self, id: usize, tag: usize) -> bool {
        self.compatible.get(id).is_some_and(|t| t.contains(&tag))
    }

    /// Ids of templates whose edges all lie in topology `tag`.
    pub fn ids_for_topology(&self, tag: usize) -> Vec<usize> {
        (0..self.len()).filter(|&id| self.is_compatible(id, tag)).collect()
    }

    pub fn records(&self) -> Vec<TemplateRecord> {
        self.templates
            .iter()
            .map(|t| TemplateRecord {
                id: t.id,
                topology: t.topology,
                compatible: self.compatible[t.id].clone(),
                edges: t.cnot_edges.clone(),
                cnot_count: t.cnot_count(),
            })
            .collect()
    }

    /// One JSON record per line, in id order.
    pub fn write_jsonl(&self, mut out: impl Write) -> Result<()> {
        for r in self.records() {
            serde_json::to_writer(&mut out, &r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn export(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_jsonl(file)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateRecord {
    pub id: usize,
    pub topology: usize,
    pub compatible: Vec<usize>,
    pub edges: Vec<Edge>,
    pub cnot_count: usize,
}

/// Frequency of each template id, most frequent first (ties by id).
pub fn template_histogram(assignments: &[(usize, usize)]) -> Vec<(usize, usize)> {
    let mut counts: HashMap<usize, usize> = HashMap::new();
    for &(_, t) in assignments {
        *counts.entry(t).or_default() += 1;
    }
    let mut table: Vec<(usize, usize)> = counts.into_iter().collect();
    table.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    table
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_line(k: usize) -> TemplateCatalog {
        enumerate(3, k, &[QubitTopology::line(&[0, 1, 2]).unwrap()], 3).unwrap()
    }

    /// Exhaustive: every word over the edge alphabet, filtered by run length.
    fn brute_force_count(edges: &[Edge], k: usize, limit: usize) -> usize {
        let mut total = 0;
        for len in 0..=k {
            let words = edges.len().pow(len as u32);
            for mut code in 0..words {
                let mut seq = Vec::with_capacity(len);
                for _ in 0..len {
                    seq.push(edges[code % edges.len()]);
                    code /= edges.len();
                }
                if runs_ok(&seq, limit) {
                    total += 1;
                }
            }
        }
        total
    }

    #[test]
    fn counts_match_brute_force() {
        let expected = [1, 3, 7, 15, 29];
        for (k, &e) in expected.iter().enumerate() {
            assert_eq!(single_line(k).len(), e);
            assert_eq!(brute_force_count(&[(0, 1), (1, 2)], k, 3), e);
        }
        assert_eq!(single_line(8).len(), brute_force_count(&[(0, 1), (1, 2)], 8, 3));
    }

    #[test]
    fn breadth_first_ids() {
        let cat = single_line(3);
        assert_eq!(cat.get(0).unwrap().cnot_count(), 0);
        let depths: Vec<usize> = cat.templates().iter().map(|t| t.cnot_count()).collect();
        assert!(depths.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(cat.get(1).unwrap().cnot_edges, vec![(0, 1)]);
        assert_eq!(cat.get(2).unwrap().cnot_edges, vec![(1, 2)]);
        assert_eq!(cat.get(3).unwrap().cnot_edges, vec![(0, 1), (0, 1)]);
    }

    #[test]
    fn parents_and_children() {
        let cat = single_line(4);
        assert_eq!(cat.children(0).unwrap(), &[1, 2]);
        assert_eq!(cat.parent(0).unwrap(), None);
        assert_eq!(cat.parent(1).unwrap(), Some(0));
        for t in cat.templates().iter().skip(1) {
            let p = cat.get(cat.parent(t.id).unwrap().unwrap()).unwrap();
            let mut edges = p.cnot_edges.clone();
            edges.push(*t.cnot_edges.last().unwrap());
            assert_eq!(edges, t.cnot_edges);
            let pg = p.skeleton.gate_list();
            let tg = t.skeleton.gate_list();
            assert!(pg.len() < tg.len() && tg[..pg.len()] == pg[..]);
            assert!(cat.children(p.id).unwrap().contains(&t.id));
        }
        assert!(matches!(cat.children(999), Err(Error::UnknownTemplate(999))));
    }

    #[test]
    fn run_limit_respected() {
        let cat = single_line(5);
        assert!(cat.lookup(&[(0, 1); 4]).is_none());
        assert!(cat.lookup(&[(0, 1); 3]).is_some());
        for t in cat.templates() {
            assert!(runs_ok(&t.cnot_edges, 3));
        }
    }

    #[test]
    fn multi_topology_catalog() {
        let a = TemplateCatalog::standard(3, 8).unwrap();
        let b = TemplateCatalog::standard(3, 8).unwrap();
        assert_eq!(a.records(), b.records());
        // union over three lines: 1 + 3·352 − 3·3 shared single-edge words
        assert_eq!(a.len(), 1048);
        assert_eq!(a.children(0).unwrap().len(), 3);
        for tag in 0..3 {
            assert_eq!(a.ids_for_topology(tag).len(), 353);
        }
        for t in a.templates() {
            let topo = &a.topologies()[t.topology];
            assert!(t.cnot_edges.iter().all(|&(x, y)| topo.contains(x, y)));
        }
    }

    #[test]
    fn small_widths() {
        let two = TemplateCatalog::standard(2, 3).unwrap();
        assert_eq!(two.len(), 4);
        let one = TemplateCatalog::standard(1, 5).unwrap();
        assert_eq!(one.len(), 1);
    }

    #[test]
    fn skeletons_evaluate_to_unitaries() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let cat = single_line(3);
        for t in cat.templates() {
            let params = (0..t.skeleton.num_params()).map(|_| rng.random_range(-3.0..3.0)).collect();
            let u = t.skeleton.with_params(params).unwrap().evaluate();
            assert!(crate::linalg::unitarity_deviation(u.matrix()) < 1e-12);
        }
    }

    #[test]
    fn histogram() {
        assert!(template_histogram(&[]).is_empty());
        let h = template_histogram(&[(0, 5), (1, 5), (2, 7)]);
        assert_eq!(h, vec![(5, 2), (7, 1)]);
        assert_eq!(h.iter().map(|x| x.1).sum::<usize>(), 3);
    }

    #[test]
    fn jsonl_export() {
        let cat = single_line(1);
        let mut buf = Vec::new();
        cat.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        let r: TemplateRecord = serde_json::from_str(text.lines().nth(2).unwrap()).unwrap();
        assert_eq!(r.edges, vec![(1, 2)]);
        assert_eq!(r.cnot_count, 1);
    }
}
