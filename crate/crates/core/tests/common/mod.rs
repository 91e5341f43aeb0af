//! Independent oracles shared by the integration tests.
#![allow(dead_code, clippy::excessive_precision)]

use nalgebra::DMatrix;
use num_complex::Complex64;

// Gauss-Kronrod 7/15 abscissae and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for i in 0..7 {
        let dx = h * XGK[i];
        let pair = f(c - dx) + f(c + dx);
        kronrod += WGK[i] * pair;
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive Gauss-Kronrod quadrature to absolute tolerance `tol`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let (value, err) = gk15(f, a, b);
    if err <= tol || (b - a).abs() < 1e-12 {
        return value;
    }
    let m = 0.5 * (a + b);
    integrate(f, a, m, 0.5 * tol) + integrate(f, m, b, 0.5 * tol)
}

/// `Ei(x)` for `x < 0` straight from the defining integral, written as
/// `-int_{-x}^inf e^-s / s ds` and substituted `s = e^u` to remove the
/// singularity.
pub fn ei_oracle(x: f64) -> f64 {
    assert!(x < 0.0);
    let lo = (-x).ln();
    let hi = lo.max(0.0) + 7.0; // exp(-e^7) underflows
    -integrate(&|u: f64| (-(u.exp())).exp(), lo, hi, 1e-15)
}

fn response(n: usize, y: f64) -> Vec<Complex64> {
    let s = 1.0 / (n as f64).sqrt();
    (0..n).map(|i| Complex64::from_polar(s, i as f64 * y)).collect()
}

fn gram_defect(freqs: &[f64], n_rx: usize, target_ones: bool) -> f64 {
    let cols: Vec<Vec<Complex64>> = freqs.iter().map(|&y| response(n_rx, y)).collect();
    let r = DMatrix::from_fn(n_rx, cols.len(), |i, j| cols[j][i]);
    let gram = r.adjoint() * &r;
    let target = if target_ones {
        DMatrix::from_element(cols.len(), cols.len(), Complex64::new(1.0, 0.0))
    } else {
        DMatrix::identity(cols.len(), cols.len())
    };
    (gram - target).norm_squared()
}

fn tuples(len: usize, base: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|t| (0..base).map(move |l| {
                let mut t = t.clone();
                t.push(l);
                t
            }))
            .collect();
    }
    out
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    (0u32..1 << n)
        .filter(|m| m.count_ones() as usize == k)
        .map(|m| (0..n).filter(|i| m >> i & 1 == 1).collect::<Vec<_>>())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect()
}

fn keep_first_minimum(best: &mut Option<(Vec<usize>, Vec<usize>, f64)>, ris: &[usize], paths: Vec<usize>, value: f64) {
    if best.as_ref().is_none_or(|b| value < b.2 - 1e-12) {
        *best = Some((ris.to_vec(), paths, value));
    }
}

/// Brute-force SM selection by materializing every candidate `R`.
pub fn brute_force_sm(cands: &[Vec<f64>], n_rx: usize) -> (Vec<usize>, Vec<usize>, f64) {
    let mut best = None;
    for ris in subsets(cands.len(), n_rx) {
        for paths in tuples(n_rx, cands[0].len()) {
            let freqs: Vec<f64> = ris.iter().zip(&paths).map(|(&k, &l)| cands[k][l]).collect();
            let v = gram_defect(&freqs, n_rx, false);
            keep_first_minimum(&mut best, &ris, paths, v);
        }
    }
    best.unwrap()
}

/// Brute-force BF selection.
pub fn brute_force_bf(cands: &[Vec<f64>], n_rx: usize) -> (Vec<usize>, Vec<usize>, f64) {
    let ris: Vec<usize> = (0..cands.len()).collect();
    let mut best = None;
    for paths in tuples(cands.len(), cands[0].len()) {
        let freqs: Vec<f64> = paths.iter().enumerate().map(|(k, &l)| cands[k][l]).collect();
        let v = gram_defect(&freqs, n_rx, true);
        keep_first_minimum(&mut best, &ris, paths, v);
    }
    best.unwrap()
}

/// One-sample Kolmogorov-Smirnov statistic.
pub fn ks_statistic(mut samples: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}
