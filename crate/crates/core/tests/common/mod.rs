#![allow(dead_code)]

use std::collections::HashMap;

use fairchain::condmodels::{loglik_and_score, DesignMatrix, Family};
use fairchain::tabular::{validate_plan, ChainPlan, Column, ColumnKind, ModelChoice, Role, Table, VariableSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal, Poisson, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

pub fn poisson(rng: &mut ChaCha8Rng, lambda: f64) -> f64 {
    if lambda <= 0.0 {
        0.0
    } else {
        Poisson::new(lambda).unwrap().sample(rng)
    }
}

pub fn negbin(rng: &mut ChaCha8Rng, mu: f64, theta: f64) -> f64 {
    let lambda = Gamma::new(theta, mu / theta).unwrap().sample(rng);
    poisson(rng, lambda)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// True parameters of a one-covariate model `family | (1, c)`.
#[derive(Clone, Copy)]
pub struct Truth {
    pub beta: [f64; 2],
    pub gamma: [f64; 2],
    pub sigma: f64,
    pub theta: f64,
}

pub fn truth(family: Family) -> Truth {
    match family {
        Family::LinearResidualEcdf | Family::GaussianLinear => Truth {
            beta: [1.0, 0.5],
            gamma: [0.0; 2],
            sigma: 0.8,
            theta: 0.0,
        },
        Family::Logistic => Truth {
            beta: [-0.3, 0.8],
            gamma: [0.0; 2],
            sigma: 0.0,
            theta: 0.0,
        },
        Family::Poisson => Truth {
            beta: [0.7, 0.3],
            gamma: [0.0; 2],
            sigma: 0.0,
            theta: 0.0,
        },
        Family::NegBin => Truth {
            beta: [0.9, 0.4],
            gamma: [0.0; 2],
            sigma: 0.0,
            theta: 1.5,
        },
        Family::Zip => Truth {
            beta: [1.2, 0.3],
            gamma: [-0.5, 0.6],
            sigma: 0.0,
            theta: 0.0,
        },
        Family::Zinb => Truth {
            beta: [1.3, 0.3],
            gamma: [-0.8, 0.5],
            sigma: 0.0,
            theta: 2.0,
        },
    }
}

/// Draws one response from `family` at covariate value `c`.
pub fn draw(family: Family, t: &Truth, c: f64, rng: &mut ChaCha8Rng) -> f64 {
    let eta = t.beta[0] + t.beta[1] * c;
    match family {
        Family::LinearResidualEcdf | Family::GaussianLinear => eta + t.sigma * normal(rng),
        Family::Logistic => (rng.random::<f64>() < sigmoid(eta)) as u8 as f64,
        Family::Poisson => poisson(rng, eta.exp()),
        Family::NegBin => negbin(rng, eta.exp(), t.theta),
        Family::Zip | Family::Zinb => {
            let pi = sigmoid(t.gamma[0] + t.gamma[1] * c);
            if rng.random::<f64>() < pi {
                0.0
            } else if family == Family::Zip {
                poisson(rng, eta.exp())
            } else {
                negbin(rng, eta.exp(), t.theta)
            }
        }
    }
}

/// `n` rows of `(c, y)` with `c ~ N(0, 1)`.
pub fn sample(family: Family, n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut r = rng(seed);
    let t = truth(family);
    let c: Vec<f64> = (0..n).map(|_| normal(&mut r)).collect();
    let y = c.iter().map(|&ci| draw(family, &t, ci, &mut r)).collect();
    (c, y)
}

pub fn kind_of(family: Family) -> ColumnKind {
    match family {
        Family::LinearResidualEcdf | Family::GaussianLinear => ColumnKind::Continuous,
        Family::Logistic => ColumnKind::Binary,
        _ => ColumnKind::Count,
    }
}

pub fn model_choice(family: Family) -> ModelChoice {
    match family {
        Family::LinearResidualEcdf => ModelChoice::LinearResidualEcdf,
        Family::GaussianLinear => ModelChoice::GaussianLinear,
        Family::Logistic => ModelChoice::Logistic,
        Family::Poisson => ModelChoice::Poisson,
        Family::NegBin => ModelChoice::Negbin,
        Family::Zip => ModelChoice::Zip,
        Family::Zinb => ModelChoice::Zinb,
    }
}

/// Binary `z` with a continuous, a count and a binary covariate that all
/// depend strongly on `z`, plus a binary outcome.
pub fn biased_dataset(n: usize, seed: u64) -> (Table, ChainPlan) {
    let mut r = rng(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut z = Vec::with_capacity(n);
    let mut cont = Vec::with_capacity(n);
    let mut count = Vec::with_capacity(n);
    let mut bin = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let zi = (r.random::<f64>() < 0.5) as u8 as f64;
        let c = 1.2 * zi + noise.sample(&mut r);
        let k = poisson(&mut r, (0.3 + 0.9 * zi).exp());
        let b = (r.random::<f64>() < sigmoid(-0.8 + 1.6 * zi)) as u8 as f64;
        let yi = (r.random::<f64>() < sigmoid(-0.5 + 0.6 * c + 0.2 * k + 0.5 * b)) as u8 as f64;
        z.push(zi);
        cont.push(c);
        count.push(k);
        bin.push(b);
        y.push(yi);
    }
    let table = Table::new(vec![
        Column::binary("z", z),
        Column::continuous("cont", cont),
        Column::count("count", count),
        Column::binary("bin", bin),
        Column::binary("y", y),
    ])
    .unwrap();
    let specs = vec![
        VariableSpec::new("z", Role::Protected, ColumnKind::Binary),
        VariableSpec::new("cont", Role::Adjust, ColumnKind::Continuous),
        VariableSpec::new("count", Role::Adjust, ColumnKind::Count).with_model(ModelChoice::Poisson),
        VariableSpec::new("bin", Role::Adjust, ColumnKind::Binary),
        VariableSpec::new("y", Role::Outcome, ColumnKind::Binary),
    ];
    let plan = validate_plan(&specs, None, 1, seed).unwrap();
    (table, plan)
}

/// Rows of `table` whose `column` equals `value`, for each of the two values.
pub fn split_by(table: &Table, values: &[f64], column: &str) -> (Vec<f64>, Vec<f64>) {
    let z = &table.column(column).unwrap().values;
    let mut a = Vec::new();
    let mut b = Vec::new();
    for (v, zi) in values.iter().zip(z) {
        if *zi == 0.0 {
            a.push(*v);
        } else {
            b.push(*v);
        }
    }
    (a, b)
}

/// Binary protected `z` and one adjust column `x` drawn from `family` with
/// linear predictor in `z`; the plan fits `family` to `x`.
pub fn family_dataset(family: Family, n: usize, seed: u64) -> (Table, ChainPlan) {
    let mut r = rng(seed);
    let t = truth(family);
    let z: Vec<f64> = (0..n).map(|_| (r.random::<f64>() < 0.5) as u8 as f64).collect();
    let x: Vec<f64> = z.iter().map(|&zi| draw(family, &t, zi, &mut r)).collect();
    let y: Vec<f64> = (0..n).map(|_| (r.random::<f64>() < 0.5) as u8 as f64).collect();
    let kind = kind_of(family);
    let x_col = match kind {
        ColumnKind::Continuous => Column::continuous("x", x),
        ColumnKind::Binary => Column::binary("x", x),
        _ => Column::count("x", x),
    };
    let table = Table::new(vec![Column::binary("z", z), x_col, Column::binary("y", y)]).unwrap();
    let specs = vec![
        VariableSpec::new("z", Role::Protected, ColumnKind::Binary),
        VariableSpec::new("x", Role::Adjust, kind).with_model(model_choice(family)),
        VariableSpec::new("y", Role::Outcome, ColumnKind::Binary),
    ];
    (table, validate_plan(&specs, None, 1, seed).unwrap())
}

/// Three-level `g`, a continuous `a` rounded to a coarse grid so that
/// conditioning rows repeat, a count `k` and a binary `b`.
pub fn tied_dataset(n: usize, seed: u64) -> (Table, ChainPlan) {
    let mut r = rng(seed);
    let levels = ["p", "q", "s"];
    let mut g = Vec::with_capacity(n);
    let mut a = Vec::with_capacity(n);
    let mut k = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let gi = i % 3;
        let ai = ((gi as f64 + normal(&mut r)) * 2.0).round() / 2.0;
        g.push(levels[gi]);
        a.push(ai);
        k.push(poisson(&mut r, (0.2 + 0.3 * gi as f64).exp()));
        b.push((r.random::<f64>() < sigmoid(-0.4 + 0.5 * gi as f64)) as u8 as f64);
        y.push((r.random::<f64>() < 0.5) as u8 as f64);
    }
    let table = Table::new(vec![
        Column::categorical("g", &g),
        Column::continuous("a", a),
        Column::count("k", k),
        Column::binary("b", b),
        Column::binary("y", y),
    ])
    .unwrap();
    let specs = vec![
        VariableSpec::new("g", Role::Protected, ColumnKind::Categorical),
        VariableSpec::new("a", Role::Adjust, ColumnKind::Continuous),
        VariableSpec::new("k", Role::Adjust, ColumnKind::Count).with_model(ModelChoice::Poisson),
        VariableSpec::new("b", Role::Adjust, ColumnKind::Binary),
        VariableSpec::new("y", Role::Outcome, ColumnKind::Binary),
    ];
    (table, validate_plan(&specs, None, 1, seed).unwrap())
}

/// Counts pairs of rows that share every conditioning value for a variable
/// but whose adjusted values reverse the original order.
pub fn rank_violations(table: &Table, adjusted: &Table, plan: &ChainPlan) -> usize {
    let mut violations = 0;
    for (j, name) in plan.order.iter().enumerate() {
        let mut groups: HashMap<Vec<u64>, Vec<usize>> = HashMap::new();
        for i in 0..table.n_rows {
            let mut key: Vec<u64> = plan
                .protected
                .iter()
                .map(|p| table.column(p).unwrap().values[i].to_bits())
                .collect();
            key.extend(
                plan.order[..j]
                    .iter()
                    .map(|prev| adjusted.column(prev).unwrap().values[i].to_bits()),
            );
            groups.entry(key).or_default().push(i);
        }
        let x = &table.column(name).unwrap().values;
        let xt = &adjusted.column(name).unwrap().values;
        for rows in groups.values() {
            for &i in rows {
                for &k in rows {
                    if x[i] < x[k] && xt[i] > xt[k] {
                        violations += 1;
                    }
                }
            }
        }
    }
    violations
}

/// Pairwise concordance with ties counted one half, by brute force.
pub fn concordance(scores: &[f64], labels: &[f64]) -> f64 {
    let mut twice = 0u64;
    let mut pairs = 0u64;
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] != 1.0 {
            continue;
        }
        for (k, &sk) in scores.iter().enumerate() {
            if labels[k] != 0.0 {
                continue;
            }
            pairs += 1;
            twice += if si > sk {
                2
            } else if si == sk {
                1
            } else {
                0
            };
        }
    }
    twice as f64 / (2 * pairs) as f64
}

pub fn random_labelled(seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut r = rng(seed);
    let n = r.random_range(2..=200);
    let mut labels: Vec<f64> = (0..n).map(|_| (r.random::<f64>() < 0.4) as u8 as f64).collect();
    labels[0] = 1.0;
    labels[1] = 0.0;
    // a coarse grid on half the datasets so that ties are common
    let grid = if seed.is_multiple_of(2) { 8.0 } else { 1e6 };
    let scores = labels
        .iter()
        .map(|l| ((0.6 * l + r.random::<f64>()) * grid).floor() / grid)
        .collect();
    (scores, labels)
}

/// Rounding noise of a log-likelihood summed over thousands of rows; steps that
/// move it by less than this are judged by the gradient instead.
pub fn resolution(ll: f64) -> f64 {
    64.0 * f64::EPSILON * ll.abs().max(1.0)
}

/// First step of `trace` that lowers the log-likelihood beyond rounding noise.
pub fn first_decrease(trace: &[f64]) -> Option<(f64, f64)> {
    trace
        .windows(2)
        .find(|w| w[1] < w[0] - resolution(w[0]))
        .map(|w| (w[0], w[1]))
}

pub fn assert_non_decreasing(trace: &[f64], what: &str) {
    if let Some((a, b)) = first_decrease(trace) {
        panic!("{what}: {a} -> {b}");
    }
}

pub fn central_difference(family: Family, params: &[f64], y: &[f64], d: &DesignMatrix, j: usize) -> f64 {
    let h = 1e-5;
    let mut up = params.to_vec();
    let mut down = params.to_vec();
    up[j] += h;
    down[j] -= h;
    let lu = loglik_and_score(family, &up, y, d).unwrap().0;
    let ld = loglik_and_score(family, &down, y, d).unwrap().0;
    (lu - ld) / (2.0 * h)
}
