//! Binary-data QRAM: random address->data tables, whole-table expansion,
//! per-qubit readout, Hamming metrics, and clustered training.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{
    address_angle_embed, basis_embed, build_qram_circuit, Embedding, ParamCircuit,
};
use crate::config::TrainConfig;
use crate::error::{QramError, Result};
use crate::seeding::{self, Purpose};
use crate::statevector::{index_to_bits, Statevector};
use crate::training::{
    init_params_stream, loss_and_grad, loss_and_param_grad, minibatch_epoch, run_circuit,
    shuffled_order, AdamState, LossKind,
};

pub const MIN_LINES: usize = 2;
pub const MAX_LINES: usize = 9;

/// `2^n` address->data pairs; address `i` stores `data[i]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryTable {
    n: usize,
    data: Vec<usize>,
}

impl BinaryTable {
    /// Uniform independent data values (sampled with replacement).
    pub fn generate(n: usize, seed: u64) -> Result<Self> {
        check_lines(n)?;
        let mut rng = seeding::stream(seed, Purpose::Table, n as u64);
        let data = (0..1usize << n)
            .map(|_| rng.gen_range(0..1usize << n))
            .collect();
        Ok(BinaryTable { n, data })
    }

    pub fn from_data(n: usize, data: Vec<usize>) -> Result<Self> {
        check_lines(n)?;
        if data.len() != 1 << n {
            return Err(QramError::Structure(format!(
                "table of width {n} needs {} entries, got {}",
                1usize << n,
                data.len()
            )));
        }
        if let Some(d) = data.iter().find(|&&d| d >= 1 << n) {
            return Err(QramError::Structure(format!(
                "data value {d} exceeds {n} bits"
            )));
        }
        Ok(BinaryTable { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[usize] {
        &self.data
    }

    pub fn address_bits(&self, i: usize) -> Vec<u8> {
        index_to_bits(i, self.n)
    }

    pub fn data_bits(&self, i: usize) -> Vec<u8> {
        index_to_bits(self.data[i], self.n)
    }
}

fn check_lines(n: usize) -> Result<()> {
    if !(MIN_LINES..=MAX_LINES).contains(&n) {
        return Err(QramError::Config(format!(
            "address width must be in {MIN_LINES}..={MAX_LINES}, got {n}"
        )));
    }
    Ok(())
}

/// Whole-table repetition of a base of `base_len` entries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExpandedDataset {
    pub target_size: usize,
    /// Base-entry index of each sample.
    pub samples: Vec<usize>,
}

/// Repeats `0..base_len` until at least `target_size` samples exist.
pub fn expand_indices(base_len: usize, target_size: usize) -> ExpandedDataset {
    let reps = target_size.div_ceil(base_len).max(1);
    ExpandedDataset {
        target_size,
        samples: (0..reps * base_len).map(|k| k % base_len).collect(),
    }
}

pub fn expand(table: &BinaryTable, target_size: usize) -> ExpandedDataset {
    expand_indices(table.len(), target_size)
}

pub fn hamming(a: &[u8], b: &[u8]) -> Result<usize> {
    if a.len() != b.len() {
        return Err(QramError::Structure(format!(
            "hamming distance of widths {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter().zip(b).filter(|(x, y)| x != y).count())
}

/// Bit is 1 iff the probability of 1 exceeds one half.
pub fn threshold_bits(probs: &[f64]) -> Vec<u8> {
    probs.iter().map(|&p| u8::from(p > 0.5)).collect()
}

/// Register state after embedding `address`.
pub fn address_state(address: &[u8], embedding: Embedding) -> Result<Statevector> {
    let n = address.len();
    let gates = match embedding {
        Embedding::Basis => basis_embed(n, address)?,
        Embedding::Angle => address_angle_embed(n, address)?,
    };
    let mut s = Statevector::zero(n)?;
    for g in &gates {
        let angles: Vec<f64> = g.params.iter().map(|a| a.resolve(&[])).collect();
        s.apply(g, &angles)?;
    }
    Ok(s)
}

/// Basis-embeds `address`, runs the QRAM, thresholds the per-qubit readout.
pub fn predict_bits(circuit: &ParamCircuit, params: &[f64], address: &[u8]) -> Result<Vec<u8>> {
    predict_bits_with(circuit, params, address, Embedding::Basis)
}

pub fn predict_bits_with(
    circuit: &ParamCircuit,
    params: &[f64],
    address: &[u8],
    embedding: Embedding,
) -> Result<Vec<u8>> {
    if address.len() != circuit.n_qubits() {
        return Err(QramError::Structure(format!(
            "address width {} does not match {}-qubit circuit",
            address.len(),
            circuit.n_qubits()
        )));
    }
    let out = run_circuit(circuit, params, &address_state(address, embedding)?)?;
    Ok(threshold_bits(&out.probs_one()))
}

/// Per-epoch metrics over the unique table entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinaryEpoch {
    pub epoch: usize,
    pub mse: f64,
    pub mean_hd: f64,
    pub pct_correct: f64,
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct BinaryMetrics {
    /// Epoch 0 is the untrained evaluation.
    pub epochs: Vec<BinaryEpoch>,
}

impl BinaryMetrics {
    pub fn final_epoch(&self) -> Option<&BinaryEpoch> {
        self.epochs.last()
    }

    fn from_tallies(tallies: &[Tally]) -> Self {
        BinaryMetrics {
            epochs: tallies
                .iter()
                .enumerate()
                .map(|(epoch, t)| t.summarize(epoch))
                .collect(),
        }
    }
}

/// Raw sums so clustered runs can be combined by entry count.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct Tally {
    hd: usize,
    correct: usize,
    mse: f64,
    count: usize,
}

impl Tally {
    fn add(&mut self, other: &Tally) {
        self.hd += other.hd;
        self.correct += other.correct;
        self.mse += other.mse;
        self.count += other.count;
    }

    fn summarize(&self, epoch: usize) -> BinaryEpoch {
        let c = self.count as f64;
        BinaryEpoch {
            epoch,
            mse: self.mse / c,
            mean_hd: self.hd as f64 / c,
            pct_correct: 100.0 * self.correct as f64 / c,
        }
    }
}

struct PreparedEntry {
    input: Statevector,
    target: Vec<f64>,
    bits: Vec<u8>,
}

fn prepare(
    table: &BinaryTable,
    members: &[usize],
    embedding: Embedding,
) -> Result<Vec<PreparedEntry>> {
    members
        .iter()
        .map(|&i| {
            let bits = table.data_bits(i);
            Ok(PreparedEntry {
                input: address_state(&table.address_bits(i), embedding)?,
                target: bits.iter().map(|&b| f64::from(b)).collect(),
                bits,
            })
        })
        .collect()
}

fn evaluate(circuit: &ParamCircuit, params: &[f64], entries: &[PreparedEntry]) -> Result<Tally> {
    let mut t = Tally::default();
    for e in entries {
        let probs = run_circuit(circuit, params, &e.input)?.probs_one();
        let (mse, _) = loss_and_grad(LossKind::Mse, &probs, &e.target)?;
        let hd = hamming(&threshold_bits(&probs), &e.bits)?;
        t.hd += hd;
        t.correct += usize::from(hd == 0);
        t.mse += mse;
        t.count += 1;
    }
    Ok(t)
}

/// Per-sample MSE between `prob_one` readout and target bits, with its parameter gradient.
fn sample_loss_grad(
    circuit: &ParamCircuit,
    params: &[f64],
    input: &Statevector,
    target: &[f64],
    observables: &[usize],
) -> Result<(f64, Vec<f64>)> {
    loss_and_param_grad(circuit, params, input, observables, |z| {
        let probs: Vec<f64> = z.iter().map(|e| (1.0 - e) / 2.0).collect();
        let (loss, dp) = loss_and_grad(LossKind::Mse, &probs, target)?;
        // p = (1 - z) / 2
        Ok((loss, dp.iter().map(|d| -0.5 * d).collect()))
    })
}

/// Trains one QRAM on the table entries in `members`. `stream` selects the
/// init/shuffle random streams so sibling QRAMs are independent.
fn train_members(
    table: &BinaryTable,
    members: &[usize],
    config: &TrainConfig,
    seed: u64,
    stream: u64,
) -> Result<(Vec<f64>, Vec<Tally>)> {
    config.validate()?;
    let circuit = build_qram_circuit(&config.architecture(table.n()))?;
    let entries = prepare(table, members, config.embedding)?;
    let expanded = expand_indices(entries.len(), config.expansion_target.max(entries.len()));
    let observables: Vec<usize> = (0..table.n()).collect();

    let mut params = init_params_stream(circuit.n_params(), seed, stream);
    let mut adam = AdamState::new(params.len(), config.learning_rate);
    let mut rng = seeding::stream(seed, Purpose::Shuffle, stream);

    let mut tallies = Vec::with_capacity(config.epochs + 1);
    tallies.push(evaluate(&circuit, &params, &entries)?);
    for epoch in 1..=config.epochs {
        let order: Vec<usize> = shuffled_order(expanded.samples.len(), &mut rng)
            .into_iter()
            .map(|k| expanded.samples[k])
            .collect();
        minibatch_epoch(&mut params, &mut adam, &order, config.batch_size, |p, i| {
            sample_loss_grad(
                &circuit,
                p,
                &entries[i].input,
                &entries[i].target,
                &observables,
            )
        })
        .map_err(|e| match e {
            QramError::Numeric(msg) => QramError::Numeric(format!("epoch {epoch}: {msg}")),
            other => other,
        })?;
        let t = evaluate(&circuit, &params, &entries)?;
        if !t.mse.is_finite() {
            return Err(QramError::Numeric(format!(
                "epoch {epoch}: non-finite loss"
            )));
        }
        tallies.push(t);
    }
    Ok((params, tallies))
}

/// Trains a single QRAM over the whole table.
pub fn train_binary_qram(
    table: &BinaryTable,
    config: &TrainConfig,
) -> Result<(Vec<f64>, BinaryMetrics)> {
    let members: Vec<usize> = (0..table.len()).collect();
    let (params, tallies) = train_members(table, &members, config, config.seed, 0)?;
    Ok((params, BinaryMetrics::from_tallies(&tallies)))
}

/// Partition of table entries into clusters.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    /// Cluster id per entry.
    pub labels: Vec<usize>,
    /// Members of each cluster in ascending entry order; clusters ordered by smallest member.
    pub members: Vec<Vec<usize>>,
}

impl ClusterAssignment {
    pub fn k(&self) -> usize {
        self.members.len()
    }
}

/// Average-linkage agglomerative clustering of equal-width codes under the
/// Hamming metric. The closest pair whose union fits in `max_cluster_size` is
/// merged until no such pair remains; ties go to the pair with the smallest
/// member indices.
pub fn cluster_codes(codes: &[Vec<u8>], max_cluster_size: usize) -> Result<ClusterAssignment> {
    if max_cluster_size < 2 {
        return Err(QramError::Config("max_cluster_size must be >= 2".into()));
    }
    let n = codes.len();
    let mut dist = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = hamming(&codes[i], &codes[j])? as f64;
            dist[i][j] = d;
            dist[j][i] = d;
        }
    }
    // cluster slot i is represented by its smallest member, which is i itself
    let mut members: Vec<Option<Vec<usize>>> = (0..n).map(|i| Some(vec![i])).collect();
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..n {
            let Some(mi) = &members[i] else { continue };
            for j in i + 1..n {
                let Some(mj) = &members[j] else { continue };
                if mi.len() + mj.len() > max_cluster_size {
                    continue;
                }
                let d = dist[i][j];
                if best.is_none_or(|(bd, _, _)| d < bd) {
                    best = Some((d, i, j));
                }
            }
        }
        let Some((_, i, j)) = best else { break };
        let mj = members[j].take().expect("live cluster");
        let mi = members[i].as_mut().expect("live cluster");
        let (si, sj) = (mi.len() as f64, mj.len() as f64);
        mi.extend(mj);
        mi.sort_unstable();
        for k in 0..n {
            if k == i || members[k].is_none() {
                continue;
            }
            let d = (si * dist[i][k] + sj * dist[j][k]) / (si + sj);
            dist[i][k] = d;
            dist[k][i] = d;
        }
    }
    let members: Vec<Vec<usize>> = members.into_iter().flatten().collect();
    let mut labels = vec![0; n];
    for (c, m) in members.iter().enumerate() {
        for &e in m {
            labels[e] = c;
        }
    }
    Ok(ClusterAssignment { labels, members })
}

/// Clusters table entries by their data bits.
pub fn cluster_table(table: &BinaryTable, max_cluster_size: usize) -> Result<ClusterAssignment> {
    let codes: Vec<Vec<u8>> = (0..table.len()).map(|i| table.data_bits(i)).collect();
    cluster_codes(&codes, max_cluster_size)
}

/// Outcome of a clustered run.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusteredRun {
    pub assignment: ClusterAssignment,
    pub params: Vec<Vec<f64>>,
    pub metrics: BinaryMetrics,
}

/// One QRAM per cluster on the members' original full-width addresses.
/// Metrics are entry-weighted over all clusters.
pub fn train_clustered(table: &BinaryTable, config: &TrainConfig) -> Result<ClusteredRun> {
    let assignment = cluster_table(table, config.max_cluster_size)?;
    train_with_assignment(table, config, assignment)
}

pub fn train_with_assignment(
    table: &BinaryTable,
    config: &TrainConfig,
    assignment: ClusterAssignment,
) -> Result<ClusteredRun> {
    use rayon::prelude::*;
    let results: Vec<Result<(Vec<f64>, Vec<Tally>)>> = assignment
        .members
        .par_iter()
        .enumerate()
        .map(|(c, m)| train_members(table, m, config, config.seed, c as u64))
        .collect();
    let mut params = Vec::with_capacity(results.len());
    let mut total = vec![Tally::default(); config.epochs + 1];
    for r in results {
        let (p, tallies) = r?;
        for (acc, t) in total.iter_mut().zip(&tallies) {
            acc.add(t);
        }
        params.push(p);
    }
    Ok(ClusteredRun {
        assignment,
        params,
        metrics: BinaryMetrics::from_tallies(&total),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn table_shapes() {
        let t = BinaryTable::generate(2, 1).unwrap();
        assert_eq!(t.len(), 4);
        let t = BinaryTable::generate(3, 1).unwrap();
        assert_eq!(t.len(), 8);
        assert!(t.data().iter().all(|&d| d < 8));
        assert_eq!(t, BinaryTable::generate(3, 1).unwrap());
        assert!(matches!(
            BinaryTable::generate(1, 0),
            Err(QramError::Config(_))
        ));
        assert!(matches!(
            BinaryTable::generate(10, 0),
            Err(QramError::Config(_))
        ));
    }

    #[test]
    fn expansion_counts() {
        // the 2-address example table {00-01, 01-11, 10-00, 11-01}
        let t = BinaryTable::from_data(2, vec![0b01, 0b11, 0b00, 0b01]).unwrap();
        let e = expand(&t, 8);
        assert_eq!(e.samples, vec![0, 1, 2, 3, 0, 1, 2, 3]);
        let pairs: Vec<(Vec<u8>, Vec<u8>)> = e
            .samples
            .iter()
            .map(|&k| (t.address_bits(k), t.data_bits(k)))
            .collect();
        assert_eq!(pairs[5], (vec![0, 1], vec![1, 1]));
        assert_eq!(expand(&t, 4).samples, vec![0, 1, 2, 3]);
        let t3 = BinaryTable::generate(3, 4).unwrap();
        assert_eq!(expand(&t3, 20).samples.len(), 24);
    }

    #[test]
    fn threshold_examples() {
        let z = [1.0, -1.0];
        let p: Vec<f64> = z.iter().map(|e| (1.0 - e) / 2.0).collect();
        assert_eq!(threshold_bits(&p), vec![0, 1]);
        let z = [0.6, -0.2];
        let p: Vec<f64> = z.iter().map(|e| (1.0 - e) / 2.0).collect();
        assert!((p[0] - 0.2).abs() < 1e-12 && (p[1] - 0.6).abs() < 1e-12);
        assert_eq!(threshold_bits(&p), vec![0, 1]);
        assert_eq!(threshold_bits(&[0.5]), vec![0]);
    }

    #[test]
    fn hamming_examples() {
        assert_eq!(hamming(&[0, 1, 0, 1], &[0, 1, 1, 0]).unwrap(), 2);
        assert_eq!(hamming(&[1, 0, 1], &[1, 0, 1]).unwrap(), 0);
        assert_eq!(hamming(&[0; 4], &[1; 4]).unwrap(), 4);
        assert!(matches!(
            hamming(&[0], &[0, 1]),
            Err(QramError::Structure(_))
        ));
    }

    #[test]
    fn predict_is_deterministic() {
        let circuit = build_qram_circuit(&crate::circuit::QramArchitecture::new(3)).unwrap();
        let params = vec![0.0; circuit.n_params()];
        let a = predict_bits(&circuit, &params, &[1, 0, 1]).unwrap();
        assert_eq!(a, predict_bits(&circuit, &params, &[1, 0, 1]).unwrap());
        assert_eq!(a.len(), 3);
        assert!(predict_bits(&circuit, &params, &[1, 0]).is_err());
    }

    #[test]
    fn clustering_separates_far_codes() {
        let codes = vec![
            vec![0, 0, 0, 0],
            vec![0, 0, 0, 1],
            vec![1, 1, 1, 0],
            vec![1, 1, 1, 1],
        ];
        let a = cluster_codes(&codes, 2).unwrap();
        assert_eq!(a.members, vec![vec![0, 1], vec![2, 3]]);
        assert_eq!(a.labels, vec![0, 0, 1, 1]);
    }

    #[test]
    fn clustering_identical_codes_merge_fully() {
        let codes = vec![vec![1, 0, 1]; 8];
        let a = cluster_codes(&codes, 8).unwrap();
        assert_eq!(a.k(), 1);
        assert_eq!(a.members[0], (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn clustering_is_a_size_capped_partition() {
        let t = BinaryTable::generate(7, 3).unwrap();
        let a = cluster_table(&t, 16).unwrap();
        let mut seen = vec![0; t.len()];
        for (c, m) in a.members.iter().enumerate() {
            assert!(!m.is_empty() && m.len() <= 16);
            for &e in m {
                seen[e] += 1;
                assert_eq!(a.labels[e], c);
            }
        }
        assert!(seen.iter().all(|&s| s == 1));
        assert!(cluster_table(&t, 1).is_err());
    }

    #[test]
    fn metrics_consistency() {
        let t = BinaryTable::generate(3, 2).unwrap();
        let (_, m) = train_binary_qram(&t, &quick(2)).unwrap();
        assert_eq!(m.epochs.len(), 3);
        for e in &m.epochs {
            assert!((0.0..=3.0).contains(&e.mean_hd));
            assert!((0.0..=100.0).contains(&e.pct_correct));
            assert_eq!(e.mean_hd == 0.0, e.pct_correct == 100.0);
            // 8 entries, so percent-correct is a multiple of 12.5
            assert!((e.pct_correct / 12.5).fract() == 0.0);
        }
    }

    #[test]
    fn single_cluster_matches_unclustered() {
        let t = BinaryTable::generate(2, 5).unwrap();
        let cfg = quick(3);
        let (p, m) = train_binary_qram(&t, &cfg).unwrap();
        let one = ClusterAssignment {
            labels: vec![0; 4],
            members: vec![vec![0, 1, 2, 3]],
        };
        let run = train_with_assignment(&t, &cfg, one).unwrap();
        assert_eq!(run.params[0], p);
        assert_eq!(run.metrics, m);
    }
}
