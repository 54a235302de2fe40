//! Shared fixtures and statistical helpers for unit tests.

use std::collections::BTreeMap;

use crate::lattice::IntMatrix;
use crate::model::{AffineExpr, InitialSpec, IntensityFactor, IntensityForm, ModelSpec, Scenario};

fn mass_action(n_species: usize, reactants: &[(usize, u32)]) -> IntensityForm {
    IntensityForm {
        factors: reactants
            .iter()
            .map(|&(j, order)| IntensityFactor { affine: AffineExpr::species(n_species, j), order })
            .collect(),
        time_factor: None,
    }
}

/// Three-species nonlinear oscillator with five reactions.
pub fn oregonator_model() -> ModelSpec {
    let p = 3;
    let m = ModelSpec {
        name: "oregonator".into(),
        species: vec!["Y1".into(), "Y2".into(), "Y3".into()],
        reactions: (1..=5).map(|i| format!("R{i}")).collect(),
        a: IntMatrix::from_rows(&[
            vec![1, -1, 1, -2, 0],
            vec![-1, -1, 0, 0, 1],
            vec![0, 0, 1, 0, -1],
        ]),
        intensities: vec![
            mass_action(p, &[(1, 1)]),
            mass_action(p, &[(0, 1), (1, 1)]),
            mass_action(p, &[(0, 1)]),
            mass_action(p, &[(0, 2)]),
            mass_action(p, &[(2, 1)]),
        ],
        init: vec![InitialSpec::Uniform { lo: 0, hi: 25 }; 3],
        scenarios: BTreeMap::from([(
            "B".to_string(),
            Scenario { observed: vec![true; 3], eta_fixed: None },
        )]),
    };
    m.validate().unwrap();
    m
}

/// Four-species gene regulation network with eight reactions; the DNA copy
/// total is folded into a capacity term `K - DNA` with `K = 10`.
pub fn prokaryotic_model() -> ModelSpec {
    let p = 4;
    let (rna, prot, dimer, dna) = (0, 1, 2, 3);
    let capacity = IntensityForm {
        factors: vec![IntensityFactor {
            affine: AffineExpr { coeffs: vec![0, 0, 0, -1], constant: 10 },
            order: 1,
        }],
        time_factor: None,
    };
    let m = ModelSpec {
        name: "prokaryotic".into(),
        species: vec!["RNA".into(), "P".into(), "P2".into(), "DNA".into()],
        reactions: (1..=8).map(|i| format!("R{i}")).collect(),
        a: IntMatrix::from_rows(&[
            vec![0, 0, 1, 0, 0, 0, -1, 0],
            vec![0, 0, 0, 1, -2, 2, 0, -1],
            vec![-1, 1, 0, 0, 1, -1, 0, 0],
            vec![-1, 1, 0, 0, 0, 0, 0, 0],
        ]),
        intensities: vec![
            mass_action(p, &[(dna, 1), (dimer, 1)]),
            capacity,
            mass_action(p, &[(dna, 1)]),
            mass_action(p, &[(rna, 1)]),
            mass_action(p, &[(prot, 2)]),
            mass_action(p, &[(dimer, 1)]),
            mass_action(p, &[(rna, 1)]),
            mass_action(p, &[(prot, 1)]),
        ],
        init: vec![
            InitialSpec::Fixed(0),
            InitialSpec::Fixed(0),
            InitialSpec::Fixed(0),
            InitialSpec::Uniform { lo: 0, hi: 10 },
        ],
        scenarios: BTreeMap::from([(
            "B".to_string(),
            Scenario { observed: vec![true; 4], eta_fixed: None },
        )]),
    };
    m.validate().unwrap();
    m
}

/// Two-sided Kolmogorov-Smirnov p-value of `samples` against the continuous
/// CDF `cdf`, using the asymptotic Kolmogorov distribution.
pub fn ks_pvalue<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let term = 2.0 * (-2.0 * (k as f64 * lambda).powi(2)).exp();
        p += if k % 2 == 1 { term } else { -term };
    }
    p.clamp(0.0, 1.0)
}
