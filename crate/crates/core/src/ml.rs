//! Digit-image QRAM and the three binary classifiers built on top of it.
//!
//! The auxiliary PQC reads an amplitude-embedded image and the main PQC reads
//! the image's address; step 1 trains both to agree, step 2 freezes the
//! auxiliary circuit and refines the main one. The classifier then runs
//! `address -> frozen main QRAM -> trainable QNN` and reads qubit 0.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{amplitude_embed, build_qram_circuit, ParamCircuit};
use crate::config::TrainConfig;
use crate::error::{QramError, Result};
use crate::seeding::{self, Purpose};
use crate::statevector::{index_to_bits, Statevector};
use crate::training::adjoint::{adjoint_backward, z_observable_diagonal};
use crate::training::{
    init_params_stream, loss_and_grad, loss_and_param_grad, minibatch_epoch, run_circuit,
    shuffled_order, AdamState, LossKind,
};

pub const ADDRESS_LINES: usize = 9;
pub const N_PIXELS: usize = 64;
pub const MAX_SAMPLES: usize = 1 << ADDRESS_LINES;
const READOUT_QUBIT: usize = 0;

// distinct random streams per model and phase
const STREAM_AUX: u64 = 100;
const STREAM_MAIN: u64 = 101;
const STREAM_STEP2: u64 = 102;
const STREAM_QRAM_QNN: u64 = 103;
const STREAM_EMBED_QNN: u64 = 104;
const STREAM_FCNN: u64 = 105;

#[derive(Clone, Debug, PartialEq)]
pub struct DigitSample {
    /// 8x8 grayscale intensities in `[0, 16]`.
    pub pixels: Vec<f64>,
    pub label: u8,
    /// Position in the filtered dataset; doubles as the QRAM address.
    pub index: usize,
}

impl DigitSample {
    pub fn address(&self) -> Vec<u8> {
        index_to_bits(self.index, ADDRESS_LINES)
    }
}

/// Reads a headerless CSV of 64 integer features plus a label and keeps the
/// rows labelled 0 or 1, in file order.
pub fn load_digits(path: &Path) -> Result<Vec<DigitSample>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| QramError::Ingestion(format!("{}: {e}", path.display())))?;
    parse_digits(&text)
}

pub fn parse_digits(text: &str) -> Result<Vec<DigitSample>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != N_PIXELS + 1 {
            return Err(QramError::Ingestion(format!(
                "line {}: expected {} columns, found {}",
                lineno + 1,
                N_PIXELS + 1,
                fields.len()
            )));
        }
        let mut values = Vec::with_capacity(fields.len());
        for f in &fields {
            let v: f64 = f.trim().parse().map_err(|_| {
                QramError::Ingestion(format!("line {}: bad number {f:?}", lineno + 1))
            })?;
            values.push(v);
        }
        let label = values[N_PIXELS];
        if label != 0.0 && label != 1.0 {
            continue;
        }
        let pixels = values[..N_PIXELS].to_vec();
        if pixels.iter().any(|p| !(0.0..=16.0).contains(p)) {
            return Err(QramError::Ingestion(format!(
                "line {}: pixel outside [0, 16]",
                lineno + 1
            )));
        }
        if pixels.iter().all(|&p| p == 0.0) {
            return Err(QramError::Ingestion(format!(
                "line {}: blank image",
                lineno + 1
            )));
        }
        if out.len() == MAX_SAMPLES {
            return Err(QramError::Ingestion(format!(
                "more than {MAX_SAMPLES} samples do not fit {ADDRESS_LINES} address lines"
            )));
        }
        out.push(DigitSample {
            pixels,
            label: label as u8,
            index: out.len(),
        });
    }
    Ok(out)
}

/// One CSV row of a metrics trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlEpoch {
    pub phase: Phase,
    pub epoch: usize,
    pub train_loss: f64,
    pub test_loss: Option<f64>,
    pub train_acc: Option<f64>,
    pub test_acc: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    QramStep1,
    QramStep2,
    Classify,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::QramStep1 => "qram_step1",
            Phase::QramStep2 => "qram_step2",
            Phase::Classify => "classify",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setup {
    QramQnn,
    QnnEmbed,
    Fcnn,
}

impl Setup {
    pub const ALL: [Setup; 3] = [Setup::QramQnn, Setup::QnnEmbed, Setup::Fcnn];

    pub fn as_str(self) -> &'static str {
        match self {
            Setup::QramQnn => "qram_qnn",
            Setup::QnnEmbed => "qnn_embed",
            Setup::Fcnn => "fcnn",
        }
    }

    pub fn parse(s: &str) -> Option<Setup> {
        Setup::ALL.into_iter().find(|x| x.as_str() == s)
    }
}

/// Per-epoch records of one pipeline, in the order they were produced.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsTrace {
    pub rows: Vec<MlEpoch>,
}

impl MetricsTrace {
    pub fn phase(&self, phase: Phase) -> impl Iterator<Item = &MlEpoch> {
        self.rows.iter().filter(move |r| r.phase == phase)
    }

    pub fn last(&self, phase: Phase) -> Option<&MlEpoch> {
        self.phase(phase).last()
    }

    /// First classifier epoch whose test accuracy is 100%.
    pub fn convergence_epoch(&self) -> Option<usize> {
        self.phase(Phase::Classify)
            .find(|r| r.test_acc == Some(1.0))
            .map(|r| r.epoch)
    }
}

fn embed_image(sample: &DigitSample) -> Result<Statevector> {
    amplitude_embed(&sample.pixels, ADDRESS_LINES)
}

fn address_input(sample: &DigitSample) -> Result<Statevector> {
    Statevector::basis(ADDRESS_LINES, sample.index)
}

fn all_qubits() -> Vec<usize> {
    (0..ADDRESS_LINES).collect()
}

/// Image path of the QRAM: amplitude embedding then the auxiliary PQC.
pub fn aux_forward(
    circuit: &ParamCircuit,
    aux_params: &[f64],
    sample: &DigitSample,
) -> Result<Vec<f64>> {
    Ok(run_circuit(circuit, aux_params, &embed_image(sample)?)?.probs_one())
}

/// Address path of the QRAM: basis embedding then the main PQC.
pub fn main_forward(
    circuit: &ParamCircuit,
    main_params: &[f64],
    address: &[u8],
) -> Result<Vec<f64>> {
    if address.len() != ADDRESS_LINES {
        return Err(QramError::Structure(format!(
            "address must have {ADDRESS_LINES} bits, got {}",
            address.len()
        )));
    }
    let input = Statevector::basis(ADDRESS_LINES, crate::statevector::bits_to_index(address))?;
    Ok(run_circuit(circuit, main_params, &input)?.probs_one())
}

#[derive(Clone, Debug, PartialEq)]
pub struct QramMlModel {
    pub circuit: ParamCircuit,
    pub aux_params: Vec<f64>,
    pub main_params: Vec<f64>,
}

pub struct TwoStepOutcome {
    pub model: QramMlModel,
    /// Auxiliary parameters when step 2 began.
    pub aux_at_step2_start: Vec<f64>,
    pub trace: MetricsTrace,
}

fn with_epoch<T>(epoch: usize, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        QramError::Numeric(m) => QramError::Numeric(format!("epoch {epoch}: {m}")),
        other => other,
    })
}

/// Mean over samples of the 9-qubit probability MSE between the two paths.
fn qram_mse(
    circuit: &ParamCircuit,
    aux: &[f64],
    main: &[f64],
    images: &[Statevector],
    addresses: &[Statevector],
) -> Result<f64> {
    let mut total = 0.0;
    for (img, addr) in images.iter().zip(addresses) {
        let pa = run_circuit(circuit, aux, img)?.probs_one();
        let pm = run_circuit(circuit, main, addr)?.probs_one();
        total += loss_and_grad(LossKind::Mse, &pm, &pa)?.0;
    }
    Ok(total / images.len() as f64)
}

/// Gradient of `MSE(main(address), aux(image))` for both parameter sets,
/// concatenated `[aux | main]`.
fn joint_sample_grad(
    circuit: &ParamCircuit,
    params: &[f64],
    image: &Statevector,
    address: &Statevector,
) -> Result<(f64, Vec<f64>)> {
    let n = circuit.n_params();
    let (aux, main) = params.split_at(n);
    let out_aux = run_circuit(circuit, aux, image)?;
    let out_main = run_circuit(circuit, main, address)?;
    let pa = out_aux.probs_one();
    let pm = out_main.probs_one();
    let (loss, d_pm) = loss_and_grad(LossKind::Mse, &pm, &pa)?;
    // dL/dz = -1/2 dL/dp; the aux path sees the opposite sign
    let up_main: Vec<f64> = d_pm.iter().map(|d| -0.5 * d).collect();
    let up_aux: Vec<f64> = d_pm.iter().map(|d| 0.5 * d).collect();
    let obs = all_qubits();
    let diag_main = z_observable_diagonal(ADDRESS_LINES, &obs, &up_main);
    let diag_aux = z_observable_diagonal(ADDRESS_LINES, &obs, &up_aux);
    let mut grad = adjoint_backward(circuit, aux, out_aux, &diag_aux);
    grad.extend(adjoint_backward(circuit, main, out_main, &diag_main));
    Ok((loss, grad))
}

/// Joint auxiliary+main training for `config.epochs`, then main-only training
/// against the frozen auxiliary outputs for another `config.epochs`.
pub fn train_qram_two_step(
    samples: &[DigitSample],
    config: &TrainConfig,
) -> Result<TwoStepOutcome> {
    config.validate()?;
    if samples.len() < 2 {
        return Err(QramError::Config(
            "two-step training needs at least 2 samples".into(),
        ));
    }
    train_qram_two_step_unchecked(samples, config)
}

fn train_qram_two_step_unchecked(
    samples: &[DigitSample],
    config: &TrainConfig,
) -> Result<TwoStepOutcome> {
    let circuit = build_qram_circuit(&config.architecture(ADDRESS_LINES))?;
    let n = circuit.n_params();
    let images: Vec<Statevector> = samples.iter().map(embed_image).collect::<Result<_>>()?;
    let addresses: Vec<Statevector> = samples.iter().map(address_input).collect::<Result<_>>()?;
    let mut trace = MetricsTrace::default();

    let mut joint = init_params_stream(n, config.seed, STREAM_AUX);
    joint.extend(init_params_stream(n, config.seed, STREAM_MAIN));
    let mut adam = AdamState::new(2 * n, config.learning_rate);
    let mut rng = seeding::stream(config.seed, Purpose::Shuffle, STREAM_AUX);

    let record = |trace: &mut MetricsTrace, phase, epoch, loss: f64| {
        trace.rows.push(MlEpoch {
            phase,
            epoch,
            train_loss: loss,
            test_loss: None,
            train_acc: None,
            test_acc: None,
        })
    };

    record(
        &mut trace,
        Phase::QramStep1,
        0,
        qram_mse(&circuit, &joint[..n], &joint[n..], &images, &addresses)?,
    );
    for epoch in 1..=config.epochs {
        let order = shuffled_order(samples.len(), &mut rng);
        with_epoch(
            epoch,
            minibatch_epoch(&mut joint, &mut adam, &order, config.batch_size, |p, i| {
                joint_sample_grad(&circuit, p, &images[i], &addresses[i])
            }),
        )?;
        let mse = qram_mse(&circuit, &joint[..n], &joint[n..], &images, &addresses)?;
        if !mse.is_finite() {
            return Err(QramError::Numeric(format!(
                "epoch {epoch}: non-finite QRAM loss"
            )));
        }
        record(&mut trace, Phase::QramStep1, epoch, mse);
    }

    let aux = joint[..n].to_vec();
    let mut main = joint[n..].to_vec();
    let targets: Vec<Vec<f64>> = images
        .iter()
        .map(|img| Ok(run_circuit(&circuit, &aux, img)?.probs_one()))
        .collect::<Result<_>>()?;
    let obs = all_qubits();
    let mut adam = AdamState::new(n, config.learning_rate);
    let mut rng = seeding::stream(config.seed, Purpose::Shuffle, STREAM_STEP2);
    for epoch in 1..=config.epochs {
        let order = shuffled_order(samples.len(), &mut rng);
        with_epoch(
            epoch,
            minibatch_epoch(&mut main, &mut adam, &order, config.batch_size, |p, i| {
                loss_and_param_grad(&circuit, p, &addresses[i], &obs, |z| {
                    let pm: Vec<f64> = z.iter().map(|e| (1.0 - e) / 2.0).collect();
                    let (l, d) = loss_and_grad(LossKind::Mse, &pm, &targets[i])?;
                    Ok((l, d.iter().map(|x| -0.5 * x).collect()))
                })
            }),
        )?;
        let mse = qram_mse(&circuit, &aux, &main, &images, &addresses)?;
        if !mse.is_finite() {
            return Err(QramError::Numeric(format!(
                "epoch {epoch}: non-finite QRAM loss"
            )));
        }
        record(&mut trace, Phase::QramStep2, epoch, mse);
    }

    Ok(TwoStepOutcome {
        aux_at_step2_start: aux.clone(),
        model: QramMlModel {
            circuit,
            aux_params: aux,
            main_params: main,
        },
        trace,
    })
}

/// Stratified split: `round(0.2 * class size)` samples of each class go to test.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn stratified_split(samples: &[DigitSample], split_seed: u64) -> Split {
    let mut rng = seeding::stream(split_seed, Purpose::Split, 0);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for label in [0u8, 1] {
        let mut idx: Vec<usize> = (0..samples.len())
            .filter(|&i| samples[i].label == label)
            .collect();
        // Fisher-Yates via the shared helper keeps the stream layout in one place
        let order = shuffled_order(idx.len(), &mut rng);
        idx = order.into_iter().map(|k| idx[k]).collect();
        let n_test = (idx.len() as f64 * 0.2).round() as usize;
        test.extend_from_slice(&idx[..n_test]);
        train.extend_from_slice(&idx[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Split { train, test }
}

/// Binary classifier trained by minibatch Adam on BCE.
trait Classifier: Sync {
    fn n_params(&self) -> usize;
    fn predict(&self, params: &[f64], sample: usize) -> Result<f64>;
    fn loss_grad(&self, params: &[f64], sample: usize, target: f64) -> Result<(f64, Vec<f64>)>;
}

fn evaluate_classifier<C: Classifier>(
    model: &C,
    params: &[f64],
    idx: &[usize],
    labels: &[f64],
) -> Result<(f64, f64)> {
    let mut loss = 0.0;
    let mut correct = 0usize;
    for &i in idx {
        let p = model.predict(params, i)?;
        loss += loss_and_grad(LossKind::Bce, &[p], &[labels[i]])?.0;
        correct += usize::from(f64::from(u8::from(p > 0.5)) == labels[i]);
    }
    let n = idx.len().max(1) as f64;
    Ok((loss / n, correct as f64 / n))
}

fn train_classifier<C: Classifier>(
    model: &C,
    mut params: Vec<f64>,
    labels: &[f64],
    split: &Split,
    config: &TrainConfig,
    stream: u64,
) -> Result<(Vec<f64>, MetricsTrace)> {
    let mut trace = MetricsTrace::default();
    let mut adam = AdamState::new(params.len(), config.learning_rate);
    let mut rng = seeding::stream(config.seed, Purpose::Shuffle, stream);
    let push = |trace: &mut MetricsTrace, epoch, params: &[f64]| -> Result<()> {
        let (train_loss, train_acc) = evaluate_classifier(model, params, &split.train, labels)?;
        let (test_loss, test_acc) = evaluate_classifier(model, params, &split.test, labels)?;
        if !train_loss.is_finite() || !test_loss.is_finite() {
            return Err(QramError::Numeric(format!(
                "epoch {epoch}: non-finite classifier loss"
            )));
        }
        trace.rows.push(MlEpoch {
            phase: Phase::Classify,
            epoch,
            train_loss,
            test_loss: Some(test_loss),
            train_acc: Some(train_acc),
            test_acc: Some(test_acc),
        });
        Ok(())
    };
    push(&mut trace, 0, &params)?;
    for epoch in 1..=config.classify_epochs {
        let order: Vec<usize> = shuffled_order(split.train.len(), &mut rng)
            .into_iter()
            .map(|k| split.train[k])
            .collect();
        with_epoch(
            epoch,
            minibatch_epoch(&mut params, &mut adam, &order, config.batch_size, |p, i| {
                model.loss_grad(p, i, labels[i])
            }),
        )?;
        push(&mut trace, epoch, &params)?;
    }
    Ok((params, trace))
}

/// QNN over a fixed input state per sample, read out as `prob_one(0)`.
struct QnnOverStates<'a> {
    circuit: &'a ParamCircuit,
    inputs: &'a [Statevector],
}

impl Classifier for QnnOverStates<'_> {
    fn n_params(&self) -> usize {
        self.circuit.n_params()
    }

    fn predict(&self, params: &[f64], sample: usize) -> Result<f64> {
        run_circuit(self.circuit, params, &self.inputs[sample])?.prob_one(READOUT_QUBIT)
    }

    fn loss_grad(&self, params: &[f64], sample: usize, target: f64) -> Result<(f64, Vec<f64>)> {
        loss_and_param_grad(
            self.circuit,
            params,
            &self.inputs[sample],
            &[READOUT_QUBIT],
            |z| {
                let p = (1.0 - z[0]) / 2.0;
                let (l, d) = loss_and_grad(LossKind::Bce, &[p], &[target])?;
                Ok((l, vec![-0.5 * d[0]]))
            },
        )
    }
}

fn labels_of(samples: &[DigitSample]) -> Vec<f64> {
    samples.iter().map(|s| f64::from(s.label)).collect()
}

/// Frozen main QRAM followed by a trainable QNN.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierModel {
    pub main_params: Vec<f64>,
    pub qnn_params: Vec<f64>,
    /// Embedding-free composition: bound main QRAM gates, then QNN slots.
    pub circuit: ParamCircuit,
}

impl ClassifierModel {
    /// Probability of label 1 for the image stored at `address`.
    pub fn predict(&self, address: &[u8]) -> Result<f64> {
        let input = Statevector::basis(ADDRESS_LINES, crate::statevector::bits_to_index(address))?;
        run_circuit(&self.circuit, &self.qnn_params, &input)?.prob_one(READOUT_QUBIT)
    }
}

/// Trains the QNN on the main QRAM's output states; main parameters never change.
pub fn train_classifier_qram(
    model: &QramMlModel,
    samples: &[DigitSample],
    split_seed: u64,
    config: &TrainConfig,
) -> Result<(ClassifierModel, MetricsTrace)> {
    config.validate()?;
    let qnn = build_qram_circuit(&config.architecture(ADDRESS_LINES))?;
    let frozen = model.circuit.bind(&model.main_params)?;
    // the frozen prefix is parameter-free, so its output per address can be cached
    let inputs: Vec<Statevector> = samples
        .iter()
        .map(|s| run_circuit(&frozen, &[], &address_input(s)?))
        .collect::<Result<_>>()?;
    let split = stratified_split(samples, split_seed);
    let clf = QnnOverStates {
        circuit: &qnn,
        inputs: &inputs,
    };
    let init = init_params_stream(clf.n_params(), config.seed, STREAM_QRAM_QNN);
    let (qnn_params, trace) = train_classifier(
        &clf,
        init,
        &labels_of(samples),
        &split,
        config,
        STREAM_QRAM_QNN,
    )?;
    Ok((
        ClassifierModel {
            main_params: model.main_params.clone(),
            qnn_params,
            circuit: frozen.concat(&qnn)?,
        },
        trace,
    ))
}

/// QNN over amplitude-embedded images.
pub fn train_classifier_embed(
    samples: &[DigitSample],
    split_seed: u64,
    config: &TrainConfig,
) -> Result<(Vec<f64>, MetricsTrace)> {
    config.validate()?;
    let qnn = build_qram_circuit(&config.architecture(ADDRESS_LINES))?;
    let inputs: Vec<Statevector> = samples.iter().map(embed_image).collect::<Result<_>>()?;
    let split = stratified_split(samples, split_seed);
    let clf = QnnOverStates {
        circuit: &qnn,
        inputs: &inputs,
    };
    let init = init_params_stream(clf.n_params(), config.seed, STREAM_EMBED_QNN);
    train_classifier(
        &clf,
        init,
        &labels_of(samples),
        &split,
        config,
        STREAM_EMBED_QNN,
    )
}

pub const FCNN_HIDDEN: usize = 16;

/// 64 -> 16 (ReLU) -> 1 (sigmoid), parameters flattened as
/// `[w1 (16x64 row-major), b1 (16), w2 (16), b2]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FcnnModel {
    pub params: Vec<f64>,
}

impl FcnnModel {
    pub const N_PARAMS: usize = FCNN_HIDDEN * N_PIXELS + FCNN_HIDDEN + FCNN_HIDDEN + 1;

    /// Uniform `(-1/sqrt(fan_in), 1/sqrt(fan_in))` per layer.
    pub fn init(seed: u64) -> Self {
        let mut rng = seeding::stream(seed, Purpose::Init, STREAM_FCNN);
        let b1 = 1.0 / (N_PIXELS as f64).sqrt();
        let b2 = 1.0 / (FCNN_HIDDEN as f64).sqrt();
        let mut params = Vec::with_capacity(Self::N_PARAMS);
        for _ in 0..FCNN_HIDDEN * N_PIXELS + FCNN_HIDDEN {
            params.push(rng.gen_range(-b1..b1));
        }
        for _ in 0..FCNN_HIDDEN + 1 {
            params.push(rng.gen_range(-b2..b2));
        }
        FcnnModel { params }
    }

    pub fn forward(params: &[f64], x: &[f64]) -> f64 {
        Self::forward_hidden(params, x).1
    }

    fn forward_hidden(params: &[f64], x: &[f64]) -> (Vec<f64>, f64) {
        let (w1, rest) = params.split_at(FCNN_HIDDEN * N_PIXELS);
        let (b1, rest) = rest.split_at(FCNN_HIDDEN);
        let (w2, b2) = rest.split_at(FCNN_HIDDEN);
        let hidden: Vec<f64> = (0..FCNN_HIDDEN)
            .map(|h| {
                let row = &w1[h * N_PIXELS..(h + 1) * N_PIXELS];
                (row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b1[h]).max(0.0)
            })
            .collect();
        let logit = hidden.iter().zip(w2).map(|(a, w)| a * w).sum::<f64>() + b2[0];
        (hidden, sigmoid(logit))
    }

    /// BCE of one sample and its gradient by backpropagation.
    pub fn loss_grad(params: &[f64], x: &[f64], target: f64) -> Result<(f64, Vec<f64>)> {
        let (hidden, p) = Self::forward_hidden(params, x);
        let (loss, _) = loss_and_grad(LossKind::Bce, &[p], &[target])?;
        // d BCE / d logit, consistent with the clamp inside the loss
        let pc = p.clamp(
            crate::training::loss::BCE_EPS,
            1.0 - crate::training::loss::BCE_EPS,
        );
        let d_logit = if pc == p { p - target } else { 0.0 };
        let w2 =
            &params[FCNN_HIDDEN * N_PIXELS + FCNN_HIDDEN..FCNN_HIDDEN * N_PIXELS + 2 * FCNN_HIDDEN];
        let mut grad = vec![0.0; params.len()];
        let (gw1, rest) = grad.split_at_mut(FCNN_HIDDEN * N_PIXELS);
        let (gb1, rest) = rest.split_at_mut(FCNN_HIDDEN);
        let (gw2, gb2) = rest.split_at_mut(FCNN_HIDDEN);
        gb2[0] = d_logit;
        for h in 0..FCNN_HIDDEN {
            gw2[h] = d_logit * hidden[h];
            if hidden[h] > 0.0 {
                let d_pre = d_logit * w2[h];
                gb1[h] = d_pre;
                for (g, v) in gw1[h * N_PIXELS..(h + 1) * N_PIXELS].iter_mut().zip(x) {
                    *g = d_pre * v;
                }
            }
        }
        Ok((loss, grad))
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Pixels scaled from `[0, 16]` to `[0, 1]`.
pub fn fcnn_features(sample: &DigitSample) -> Vec<f64> {
    sample.pixels.iter().map(|p| p / 16.0).collect()
}

struct FcnnClassifier {
    features: Vec<Vec<f64>>,
}

impl Classifier for FcnnClassifier {
    fn n_params(&self) -> usize {
        FcnnModel::N_PARAMS
    }

    fn predict(&self, params: &[f64], sample: usize) -> Result<f64> {
        Ok(FcnnModel::forward(params, &self.features[sample]))
    }

    fn loss_grad(&self, params: &[f64], sample: usize, target: f64) -> Result<(f64, Vec<f64>)> {
        FcnnModel::loss_grad(params, &self.features[sample], target)
    }
}

pub fn train_fcnn(
    samples: &[DigitSample],
    split_seed: u64,
    config: &TrainConfig,
) -> Result<(FcnnModel, MetricsTrace)> {
    config.validate()?;
    let clf = FcnnClassifier {
        features: samples.iter().map(fcnn_features).collect(),
    };
    let split = stratified_split(samples, split_seed);
    debug_assert_eq!(clf.n_params(), FcnnModel::N_PARAMS);
    let (params, trace) = train_classifier(
        &clf,
        FcnnModel::init(config.seed).params,
        &labels_of(samples),
        &split,
        config,
        STREAM_FCNN,
    )?;
    Ok((FcnnModel { params }, trace))
}

/// Everything one seed of the QRAM+QNN pipeline produces.
pub struct QramQnnRun {
    pub qram: TwoStepOutcome,
    pub classifier: ClassifierModel,
    /// Step-1, step-2 and classifier rows in order.
    pub trace: MetricsTrace,
}

pub fn run_qram_qnn(
    samples: &[DigitSample],
    split_seed: u64,
    config: &TrainConfig,
) -> Result<QramQnnRun> {
    let qram = train_qram_two_step(samples, config)?;
    let (classifier, clf_trace) = train_classifier_qram(&qram.model, samples, split_seed, config)?;
    let mut trace = qram.trace.clone();
    trace.rows.extend(clf_trace.rows);
    Ok(QramQnnRun {
        qram,
        classifier,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(n: usize) -> Vec<DigitSample> {
        (0..n)
            .map(|i| DigitSample {
                pixels: (0..N_PIXELS)
                    .map(|p| ((p * 31 + i * 17) % 17) as f64)
                    .collect(),
                label: (i % 2) as u8,
                index: i,
            })
            .collect()
    }

    #[test]
    fn parse_filters_and_addresses() {
        let mut text = String::new();
        for label in [0, 3, 1, 1, 7] {
            let row: Vec<String> = (0..N_PIXELS).map(|p| (p % 17).to_string()).collect();
            text.push_str(&format!("{},{}\n", row.join(","), label));
        }
        let s = parse_digits(&text).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.iter().map(|d| d.label).collect::<Vec<_>>(), vec![0, 1, 1]);
        assert_eq!(s[0].address(), vec![0; 9]);
        assert_eq!(s[2].index, 2);
    }

    #[test]
    fn address_of_359() {
        let d = DigitSample {
            pixels: vec![1.0; N_PIXELS],
            label: 0,
            index: 359,
        };
        assert_eq!(d.address(), vec![1, 0, 1, 1, 0, 0, 1, 1, 1]);
    }

    #[test]
    fn parse_rejects_malformed() {
        assert!(matches!(
            parse_digits("1,2,3\n"),
            Err(QramError::Ingestion(_))
        ));
        let row: Vec<String> = (0..N_PIXELS).map(|_| "x".to_string()).collect();
        assert!(parse_digits(&format!("{},0\n", row.join(","))).is_err());
        let blank: Vec<String> = (0..N_PIXELS).map(|_| "0".to_string()).collect();
        assert!(parse_digits(&format!("{},1\n", blank.join(","))).is_err());
        let row: Vec<String> = (0..N_PIXELS).map(|_| "1".to_string()).collect();
        let many = format!("{},1\n", row.join(",")).repeat(MAX_SAMPLES + 1);
        assert!(matches!(parse_digits(&many), Err(QramError::Ingestion(_))));
        assert!(matches!(
            load_digits(Path::new("/nonexistent/digits.csv")),
            Err(QramError::Ingestion(_))
        ));
    }

    #[test]
    fn split_is_stratified_disjoint_cover() {
        let s = synthetic(50);
        let sp = stratified_split(&s, 3);
        assert_eq!(sp.test.len(), 10);
        let mut all: Vec<usize> = sp.train.iter().chain(&sp.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..50).collect::<Vec<_>>());
        assert_eq!(sp.test.iter().filter(|&&i| s[i].label == 1).count(), 5);
        assert_eq!(sp, stratified_split(&s, 3));
    }

    #[test]
    fn forwards_are_bounded_and_deterministic() {
        let c = build_qram_circuit(&crate::circuit::QramArchitecture::new(ADDRESS_LINES)).unwrap();
        let p = init_params_stream(c.n_params(), 1, 0);
        let s = &synthetic(3)[2];
        let a = aux_forward(&c, &p, s).unwrap();
        assert_eq!(a, aux_forward(&c, &p, s).unwrap());
        assert!(a.iter().all(|x| (0.0..=1.0).contains(x)));
        let m = main_forward(&c, &p, &s.address()).unwrap();
        assert_eq!(m.len(), 9);
        assert!(m.iter().all(|x| (0.0..=1.0).contains(x)));
        assert!(main_forward(&c, &p, &[0, 1]).is_err());
    }

    #[test]
    fn zero_params_match_skeleton() {
        let c = build_qram_circuit(&crate::circuit::QramArchitecture::new(ADDRESS_LINES)).unwrap();
        let zeros = vec![0.0; c.n_params()];
        // with zero angles only the X and CNOT gates act
        let skeleton: Vec<crate::Gate> = c
            .gates()
            .iter()
            .filter(|g| g.params.is_empty())
            .cloned()
            .collect();
        let skel = ParamCircuit::new(ADDRESS_LINES, skeleton).unwrap();
        let s = &synthetic(4)[3];
        let want = run_circuit(&skel, &[], &embed_image(s).unwrap())
            .unwrap()
            .probs_one();
        let got = aux_forward(&c, &zeros, s).unwrap();
        for (a, b) in want.iter().zip(&got) {
            assert!((a - b).abs() < 1e-12);
        }
        let want = run_circuit(&skel, &[], &address_input(s).unwrap())
            .unwrap()
            .probs_one();
        let got = main_forward(&c, &zeros, &s.address()).unwrap();
        for (a, b) in want.iter().zip(&got) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn fcnn_gradient_matches_finite_differences() {
        let m = FcnnModel::init(4);
        let x: Vec<f64> = (0..N_PIXELS).map(|i| (i % 5) as f64 / 4.0).collect();
        for target in [0.0, 1.0] {
            let (_, g) = FcnnModel::loss_grad(&m.params, &x, target).unwrap();
            let mut worst: f64 = 0.0;
            let mut p = m.params.clone();
            for i in 0..p.len() {
                let h = 1e-5;
                let orig = p[i];
                p[i] = orig + h;
                let up = FcnnModel::loss_grad(&p, &x, target).unwrap().0;
                p[i] = orig - h;
                let dn = FcnnModel::loss_grad(&p, &x, target).unwrap().0;
                p[i] = orig;
                let fd = (up - dn) / (2.0 * h);
                worst = worst.max((fd - g[i]).abs() / fd.abs().max(1e-2));
            }
            assert!(worst < 1e-5, "worst relative error {worst}");
        }
    }

    #[test]
    fn fcnn_zero_input_in_open_interval() {
        let m = FcnnModel::init(0);
        let p = FcnnModel::forward(&m.params, &[0.0; N_PIXELS]);
        assert!(p > 0.0 && p < 1.0);
    }

    #[test]
    fn two_step_rejects_tiny_dataset() {
        assert!(train_qram_two_step(&synthetic(1), &TrainConfig::default()).is_err());
    }

    #[test]
    fn single_sample_main_memorizes_aux() {
        let cfg = TrainConfig {
            epochs: 150,
            learning_rate: 0.05,
            ..TrainConfig::default()
        };
        let samples = synthetic(1);
        let out = train_qram_two_step_unchecked(&samples, &cfg).unwrap();
        let last = out.trace.last(Phase::QramStep2).unwrap().train_loss;
        assert!(last < 1e-3, "final MSE {last}");
        assert_eq!(out.aux_at_step2_start, out.model.aux_params);
    }
}
