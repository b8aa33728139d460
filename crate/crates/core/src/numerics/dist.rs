use crate::error::{Error, Result};

const SQRT_2: f64 = std::f64::consts::SQRT_2;

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / SQRT_2)
}

/// Inverse standard normal CDF, checked.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("normal_quantile needs p in (0,1), got {p}")));
    }
    Ok(standard_normal_quantile(p))
}

const A: [f64; 8] = [3.387_132_872_796_366_5, 1.331_416_678_917_843_8e2, 1.971_590_950_306_551_4e3, 1.373_169_376_550_946_1e4, 4.592_195_393_154_987_1e4, 6.726_577_092_700_870_1e4, 3.343_057_558_358_812_8e4, 2.509_080_928_730_122_7e3];
const B: [f64; 8] = [1.0, 4.231_333_070_160_091_1e1, 6.871_870_074_920_579_1e2, 5.394_196_021_424_751_1e3, 2.121_379_430_158_659_6e4, 3.930_789_580_009_271_1e4, 2.872_908_573_572_194_3e4, 5.226_495_278_852_854_6e3];
const C: [f64; 8] = [1.423_437_110_749_683_6, 4.630_337_846_156_545_3, 5.769_497_221_460_691_4, 3.647_848_324_763_204_6, 1.270_458_252_452_368_4, 2.417_807_251_774_506_1e-1, 2.272_384_498_926_918_4e-2, 7.745_450_142_783_414e-4];
const D: [f64; 8] = [1.0, 2.053_191_626_637_758_8, 1.676_384_830_183_803_8, 6.897_673_349_851e-1, 1.481_039_764_274_800_7e-1, 1.519_866_656_361_645_7e-2, 5.475_938_084_995_345e-4, 1.050_750_071_644_416_8e-9];
const E: [f64; 8] = [6.657_904_643_501_103_8, 5.463_784_911_164_114_4, 1.784_826_539_917_291_3, 2.965_605_718_285_048_9e-1, 2.653_218_952_657_612_3e-2, 1.242_660_947_388_078_4e-3, 2.711_555_568_743_487_6e-5, 2.010_334_399_292_288_1e-7];
const F: [f64; 8] = [1.0, 5.998_322_065_558_879_4e-1, 1.369_298_809_227_358e-1, 1.487_536_129_085_061_5e-2, 7.868_691_311_456_132_6e-4, 1.846_318_317_510_054_7e-5, 1.421_511_758_316_445_9e-7, 2.044_263_103_389_939_8e-15];

/// Polynomial with coefficients in increasing degree, by Horner's rule.
fn poly(c: &[f64; 8], r: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, k| acc * r + k)
}

/// Wichura's AS241 (PPND16), relative accuracy about 1e-16.
pub(crate) fn standard_normal_quantile(p: f64) -> f64 {
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let r = (-tail.ln()).sqrt();
    let val = if r <= 5.0 {
        poly(&C, r - 1.6) / poly(&D, r - 1.6)
    } else {
        poly(&E, r - 5.0) / poly(&F, r - 5.0)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

/// Total-variation distance between two normals sharing a standard deviation:
/// `2 Φ(|Δ| / 2σ) − 1`.
pub fn gaussian_tv(mean1: f64, mean2: f64, shared_sd: f64) -> Result<f64> {
    if !(shared_sd > 0.0) {
        return Err(Error::Domain(format!("gaussian_tv needs sd > 0, got {shared_sd}")));
    }
    let half_gap = (mean1 - mean2).abs() / (2.0 * shared_sd);
    Ok(libm::erf(half_gap / SQRT_2))
}
