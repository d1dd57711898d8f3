//! Per-layer two-sample t-tests between correct and incorrect populations,
//! with Bonferroni correction.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Label;
use crate::similarity::AnswerSimilarityProfile;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TTestVariant {
    Student,
    #[default]
    Welch,
}

impl std::str::FromStr for TTestVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "student" => Ok(TTestVariant::Student),
            "welch" => Ok(TTestVariant::Welch),
            other => Err(Error::InvalidInput(format!(
                "unknown t-test variant `{other}`"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    /// Two-sided.
    pub p: f64,
}

/// Lanczos approximation (g = 7, 9 terms) of `ln Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    let t = x + 7.5;
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Continued fraction for the incomplete beta, evaluated with the modified
/// Lentz method.
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=20_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

/// Two-sided tail probability `P(|T| ≥ |t|)` of Student's t with `df`
/// degrees of freedom.
pub fn t_two_sided_p(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Independent two-sample t-test; the statistic is positive when `a` has
/// the larger mean.
pub fn t_test(a: &[f64], b: &[f64], variant: TTestVariant) -> Result<TTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "t-test needs at least 2 values per sample, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (se2, df) = match variant {
        TTestVariant::Student => {
            let pooled = ((na - 1.0) * va + (nb - 1.0) * vb) / (na + nb - 2.0);
            (pooled * (1.0 / na + 1.0 / nb), na + nb - 2.0)
        }
        TTestVariant::Welch => {
            let (qa, qb) = (va / na, vb / nb);
            let se2 = qa + qb;
            (
                se2,
                se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0)),
            )
        }
    };
    if !(se2 > 0.0) {
        return Err(Error::DegenerateVariance);
    }
    let t = (ma - mb) / se2.sqrt();
    Ok(TTest {
        t,
        df,
        p: t_two_sided_p(t, df),
    })
}

/// Bonferroni-adjusted significance level marker.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Significance {
    #[serde(rename = "ns")]
    NotSignificant,
    #[serde(rename = "*")]
    P05,
    #[serde(rename = "**")]
    P01,
    #[serde(rename = "***")]
    P001,
}

impl Significance {
    pub fn from_p(p: f64) -> Self {
        if p < 0.001 {
            Significance::P001
        } else if p < 0.01 {
            Significance::P01
        } else if p < 0.05 {
            Significance::P05
        } else {
            Significance::NotSignificant
        }
    }

    pub fn stars(self) -> &'static str {
        match self {
            Significance::NotSignificant => "ns",
            Significance::P05 => "*",
            Significance::P01 => "**",
            Significance::P001 => "***",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerTestResult {
    pub layer: usize,
    pub t: f64,
    pub df: f64,
    pub p_raw: f64,
    pub p_corrected: f64,
    /// `mean(correct) - mean(incorrect)`.
    pub mean_diff: f64,
    pub significance_stars: Significance,
    pub n_correct: usize,
    pub n_incorrect: usize,
}

pub fn bonferroni(p: f64, family_size: usize) -> f64 {
    (p * family_size as f64).min(1.0)
}

/// One test per layer on `mean_cos`, correct vs. incorrect. Only labeled,
/// distribution-eligible, multi-token profiles take part.
pub fn layer_analysis(
    profiles: &[AnswerSimilarityProfile],
    family_size: usize,
    variant: TTestVariant,
) -> Result<Vec<LayerTestResult>> {
    if family_size == 0 {
        return Err(Error::InvalidInput("family size must be at least 1".into()));
    }
    let usable: Vec<_> = profiles
        .iter()
        .filter(|p| p.distribution_eligible && !p.single_token && p.label.is_some())
        .collect();
    let layers = usable
        .first()
        .map(|p| p.layer_count())
        .ok_or_else(|| Error::InvalidInput("no labeled profiles to analyse".into()))?;
    let class = |label: Label, l: usize| -> Vec<f64> {
        usable
            .iter()
            .filter(|p| p.label == Some(label))
            .map(|p| p.mean_cos[l])
            .collect()
    };
    (0..layers)
        .map(|l| {
            let correct = class(Label::Correct, l);
            let incorrect = class(Label::Incorrect, l);
            let test = t_test(&correct, &incorrect, variant)?;
            let p_corrected = bonferroni(test.p, family_size);
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            Ok(LayerTestResult {
                layer: l,
                t: test.t,
                df: test.df,
                p_raw: test.p,
                p_corrected,
                mean_diff: mean(&correct) - mean(&incorrect),
                significance_stars: Significance::from_p(p_corrected),
                n_correct: correct.len(),
                n_incorrect: incorrect.len(),
            })
        })
        .collect()
}

fn strip_leading_zero(s: String) -> String {
    if let Some(rest) = s.strip_prefix("0.") {
        format!(".{rest}")
    } else if let Some(rest) = s.strip_prefix("-0.") {
        format!("-.{rest}")
    } else {
        s
    }
}

/// Markdown table with one row per layer (1-based): corrected p-value,
/// signed mean difference and significance stars.
pub fn render_table(title: &str, results: &[LayerTestResult]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "### {title}\n");
    let _ = writeln!(out, "| layer | p-value | diff. | sig. |");
    let _ = writeln!(out, "|---|---|---|---|");
    for r in results {
        let p = strip_leading_zero(format!("{:.3}", r.p_corrected));
        let diff = format!("{:.3}", r.mean_diff);
        let diff = if r.mean_diff >= 0.0 {
            format!("+{}", strip_leading_zero(diff))
        } else {
            strip_leading_zero(diff)
        };
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} |",
            r.layer + 1,
            p,
            diff,
            r.significance_stars.stars()
        );
    }
    out
}
