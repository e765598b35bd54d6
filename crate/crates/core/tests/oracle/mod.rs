//! Reference computations that share no code with the library's dynamic
//! programs: exhaustive enumeration of labelings and central finite
//! differences.
#![allow(dead_code)]

use lexattr::crf::{Crf, EmissionParams, Instance};
use ndarray::{Array1, Array2};
use rand::Rng;

pub struct Enumerated {
    pub log_z: f64,
    pub marginals: Array2<f64>,
    pub best_path: Vec<usize>,
    pub best_score: f64,
}

/// Score of one labeling, summed term by term.
pub fn path_score(
    em: &Array2<f64>,
    trans: &Array2<f64>,
    start: &Array1<f64>,
    stop: &Array1<f64>,
    path: &[usize],
) -> f64 {
    let mut s = start[path[0]];
    for i in 0..path.len() {
        s += em[[i, path[i]]];
    }
    for i in 1..path.len() {
        s += trans[[path[i - 1], path[i]]];
    }
    s + stop[path[path.len() - 1]]
}

/// Visits every labeling of length `n` over `l` labels.
pub fn all_paths(n: usize, l: usize) -> Vec<Vec<usize>> {
    let total = l.pow(n as u32);
    (0..total)
        .map(|mut code| {
            let mut p = vec![0; n];
            for slot in p.iter_mut().rev() {
                *slot = code % l;
                code /= l;
            }
            p
        })
        .collect()
}

pub fn enumerate(
    em: &Array2<f64>,
    trans: &Array2<f64>,
    start: &Array1<f64>,
    stop: &Array1<f64>,
) -> Enumerated {
    let (n, l) = em.dim();
    let paths = all_paths(n, l);
    let scores: Vec<f64> = paths
        .iter()
        .map(|p| path_score(em, trans, start, stop, p))
        .collect();
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = scores.iter().map(|s| (s - max).exp()).sum();
    let log_z = max + z.ln();
    let mut marginals = Array2::zeros((n, l));
    for (p, s) in paths.iter().zip(&scores) {
        let prob = (s - log_z).exp();
        for (i, &y) in p.iter().enumerate() {
            marginals[[i, y]] += prob;
        }
    }
    let best = scores
        .iter()
        .enumerate()
        .fold(0, |b, (i, s)| if *s > scores[b] { i } else { b });
    Enumerated {
        log_z,
        marginals,
        best_path: paths[best].clone(),
        best_score: scores[best],
    }
}

pub fn uniform_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-scale..scale))
}

pub fn uniform_vector<R: Rng>(rng: &mut R, len: usize, scale: f64) -> Array1<f64> {
    Array1::from_shape_fn(len, |_| rng.gen_range(-scale..scale))
}

/// One scalar parameter of a [`Crf`].
#[derive(Clone, Copy, Debug)]
pub enum Param {
    Transition(usize, usize),
    Start(usize),
    Stop(usize),
    Sparse(u32, usize),
    DenseWeight(usize, usize),
    DenseBias(usize),
}

pub fn get(crf: &Crf, p: Param) -> f64 {
    match (p, &crf.emission) {
        (Param::Transition(a, b), _) => crf.chain.transitions[[a, b]],
        (Param::Start(a), _) => crf.chain.start[a],
        (Param::Stop(a), _) => crf.chain.stop[a],
        (Param::Sparse(f, t), EmissionParams::Sparse(w)) => w.get(f, t),
        (Param::DenseWeight(k, t), EmissionParams::Dense(d)) => d.weights[[k, t]],
        (Param::DenseBias(t), EmissionParams::Dense(d)) => d.bias[t],
        _ => panic!("parameter does not exist in this model"),
    }
}

pub fn set(crf: &mut Crf, p: Param, v: f64) {
    match (p, &mut crf.emission) {
        (Param::Transition(a, b), _) => crf.chain.transitions[[a, b]] = v,
        (Param::Start(a), _) => crf.chain.start[a] = v,
        (Param::Stop(a), _) => crf.chain.stop[a] = v,
        (Param::Sparse(f, t), EmissionParams::Sparse(w)) => w.set(f, t, v),
        (Param::DenseWeight(k, t), EmissionParams::Dense(d)) => d.weights[[k, t]] = v,
        (Param::DenseBias(t), EmissionParams::Dense(d)) => d.bias[t] = v,
        _ => panic!("parameter does not exist in this model"),
    }
}

/// Every chain parameter plus every emission parameter touched by `batch`.
pub fn parameters(crf: &Crf, batch: &[Instance]) -> Vec<Param> {
    let l = crf.num_labels();
    let mut ps = Vec::new();
    for a in 0..l {
        for b in 0..l {
            ps.push(Param::Transition(a, b));
        }
        ps.push(Param::Start(a));
        ps.push(Param::Stop(a));
    }
    match &crf.emission {
        EmissionParams::Sparse(_) => {
            let mut feats: Vec<u32> = batch
                .iter()
                .flat_map(|inst| match &inst.input {
                    lexattr::crf::EmissionInput::Sparse(fs) => {
                        fs.iter().flat_map(|f| f.entries().iter().map(|e| e.0)).collect::<Vec<_>>()
                    }
                    _ => vec![],
                })
                .collect();
            feats.sort_unstable();
            feats.dedup();
            for f in feats {
                for t in 0..l {
                    ps.push(Param::Sparse(f, t));
                }
            }
        }
        EmissionParams::Dense(d) => {
            for k in 0..d.input_dim() {
                for t in 0..l {
                    ps.push(Param::DenseWeight(k, t));
                }
            }
            for t in 0..l {
                ps.push(Param::DenseBias(t));
            }
        }
    }
    ps
}

/// Central difference `(f(θ+h) − f(θ−h)) / 2h` of the regularized
/// log-likelihood, computed by brute-force enumeration.
pub fn finite_difference(crf: &Crf, batch: &[Instance], l2: f64, p: Param, h: f64) -> f64 {
    let mut plus = crf.clone();
    set(&mut plus, p, get(crf, p) + h);
    let mut minus = crf.clone();
    set(&mut minus, p, get(crf, p) - h);
    (objective(&plus, batch, l2) - objective(&minus, batch, l2)) / (2.0 * h)
}

/// Regularized log-likelihood by enumeration.
pub fn objective(crf: &Crf, batch: &[Instance], l2: f64) -> f64 {
    let mut total = 0.0;
    for inst in batch {
        let em = crf.emissions(&inst.input).unwrap().into_inner();
        let e = enumerate(&em, &crf.chain.transitions, &crf.chain.start, &crf.chain.stop);
        total += path_score(&em, &crf.chain.transitions, &crf.chain.start, &crf.chain.stop, &inst.labels)
            - e.log_z;
    }
    total - l2 * crf.norm_sq()
}

/// `|a − b| / max(|a|, |b|, floor)`.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

pub fn gradient_value(g: &lexattr::crf::Gradient, p: Param) -> f64 {
    use lexattr::crf::EmissionGradient;
    match (p, &g.emission) {
        (Param::Transition(a, b), _) => g.transitions[[a, b]],
        (Param::Start(a), _) => g.start[a],
        (Param::Stop(a), _) => g.stop[a],
        (Param::Sparse(f, t), EmissionGradient::Sparse(rows)) => rows.get(&f).map_or(0.0, |r| r[t]),
        (Param::DenseWeight(k, t), EmissionGradient::Dense { weights, .. }) => weights[[k, t]],
        (Param::DenseBias(t), EmissionGradient::Dense { bias, .. }) => bias[t],
        _ => panic!("parameter does not exist in this gradient"),
    }
}

/// Random sparse or dense toy problem: a model with uniform parameters and
/// a batch of labeled sequences.
pub fn random_problem<R: Rng>(
    rng: &mut R,
    labels: usize,
    max_len: usize,
    batch: usize,
    dense: bool,
) -> (Crf, Vec<Instance>) {
    use lexattr::crf::EmissionInput;
    use lexattr::emission::SparseFeatureVector;
    let feature_dim = 12u32;
    let input_dim = 3;
    let mut crf = if dense {
        Crf::dense(labels, input_dim)
    } else {
        Crf::sparse(labels, feature_dim)
    };
    crf.chain.transitions = uniform_matrix(rng, labels, labels, 1.0);
    crf.chain.start = uniform_vector(rng, labels, 1.0);
    crf.chain.stop = uniform_vector(rng, labels, 1.0);
    let instances: Vec<Instance> = (0..batch)
        .map(|_| {
            let n = rng.gen_range(1..=max_len);
            let input = if dense {
                EmissionInput::Dense(uniform_matrix(rng, n, input_dim, 1.0))
            } else {
                EmissionInput::Sparse(
                    (0..n)
                        .map(|_| {
                            let k = rng.gen_range(1..=3);
                            let entries = (0..k)
                                .map(|_| (rng.gen_range(0..feature_dim), rng.gen_range(0.5..1.5)))
                                .collect();
                            SparseFeatureVector::new(feature_dim, entries)
                        })
                        .collect(),
                )
            };
            let labels_vec = (0..n).map(|_| rng.gen_range(0..labels)).collect();
            Instance {
                input,
                labels: labels_vec,
            }
        })
        .collect();
    for p in parameters(&crf, &instances) {
        if matches!(p, Param::Sparse(..) | Param::DenseWeight(..) | Param::DenseBias(..)) {
            let v = rng.gen_range(-1.0..1.0);
            set(&mut crf, p, v);
        }
    }
    (crf, instances)
}
