//! Fréchet distances over sets of event curves, in four pairings.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gaussian::{covariance_term, fit_rows, frechet_distance, ConditionalGaussian};
use crate::curve::EventCurve;
use crate::error::{Error, Result};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FdMode {
    /// Generated music against ground-truth music.
    #[serde(rename = "M")]
    Music,
    /// `[music; video]` concatenations, generated against ground truth.
    #[serde(rename = "M+V")]
    MusicPlusVideo,
    /// Generated music against the video curves themselves.
    #[serde(rename = "M-V")]
    MusicMinusVideo,
    /// Conditional music given each video, averaged over the videos.
    #[serde(rename = "M|V")]
    MusicGivenVideo,
}

impl FdMode {
    pub const ALL: [FdMode; 4] = [
        FdMode::Music,
        FdMode::MusicPlusVideo,
        FdMode::MusicMinusVideo,
        FdMode::MusicGivenVideo,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            FdMode::Music => "M",
            FdMode::MusicPlusVideo => "M+V",
            FdMode::MusicMinusVideo => "M-V",
            FdMode::MusicGivenVideo => "M|V",
        }
    }
}

impl fmt::Display for FdMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FdMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "M" => Ok(FdMode::Music),
            "M+V" | "M_plus_V" => Ok(FdMode::MusicPlusVideo),
            "M-V" | "M_minus_V" => Ok(FdMode::MusicMinusVideo),
            "M|V" | "M_given_V" => Ok(FdMode::MusicGivenVideo),
            other => Err(Error::InvalidConfig(format!(
                "unknown FD mode '{other}' (expected M, M+V, M-V or M|V)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveFd {
    pub mode: FdMode,
    /// Squared distance.
    pub value: f64,
    /// Per evaluation video for `M|V`, empty otherwise.
    pub items: Vec<f64>,
}

fn check_paired(gen: &[EventCurve], gt: &[EventCurve], video: &[EventCurve]) -> Result<()> {
    if gen.len() != video.len() || gt.len() != video.len() {
        return Err(Error::Pairing(format!(
            "paired modes need one video per music curve (generated {}, ground truth {}, video {})",
            gen.len(),
            gt.len(),
            video.len()
        )));
    }
    Ok(())
}

fn values(curves: &[EventCurve]) -> Vec<&[f64]> {
    curves.iter().map(|c| c.values()).collect()
}

fn concat(music: &[EventCurve], video: &[EventCurve]) -> Vec<Vec<f64>> {
    music
        .iter()
        .zip(video)
        .map(|(m, v)| [m.values(), v.values()].concat())
        .collect()
}

/// Squared Fréchet distance between curve distributions under `mode`.
///
/// `M|V` fits a joint Gaussian over `[music; video]` pairs for each of the
/// generated and ground-truth sets, conditions both on every video curve and
/// averages the per-video distances. Conditional covariances do not depend
/// on the video, so their trace term is computed once.
pub fn curve_fd(gen: &[EventCurve], gt: &[EventCurve], video: &[EventCurve], mode: FdMode) -> Result<CurveFd> {
    let (value, items) = match mode {
        FdMode::Music => {
            let d = frechet_distance(&fit_rows(&values(gen))?, &fit_rows(&values(gt))?)?;
            (d, Vec::new())
        }
        FdMode::MusicMinusVideo => {
            let d = frechet_distance(&fit_rows(&values(gen))?, &fit_rows(&values(video))?)?;
            (d, Vec::new())
        }
        FdMode::MusicPlusVideo => {
            check_paired(gen, gt, video)?;
            let a = concat(gen, video);
            let b = concat(gt, video);
            let a: Vec<&[f64]> = a.iter().map(|r| r.as_slice()).collect();
            let b: Vec<&[f64]> = b.iter().map(|r| r.as_slice()).collect();
            (frechet_distance(&fit_rows(&a)?, &fit_rows(&b)?)?, Vec::new())
        }
        FdMode::MusicGivenVideo => {
            check_paired(gen, gt, video)?;
            let m_dim = gen.first().map_or(0, |c| c.len());
            let a = concat(gen, video);
            let b = concat(gt, video);
            let a: Vec<&[f64]> = a.iter().map(|r| r.as_slice()).collect();
            let b: Vec<&[f64]> = b.iter().map(|r| r.as_slice()).collect();
            let cg = ConditionalGaussian::new(&fit_rows(&a)?, m_dim)?;
            let ct = ConditionalGaussian::new(&fit_rows(&b)?, m_dim)?;
            if gt[0].len() != m_dim {
                return Err(Error::Shape("generated and ground-truth music lengths differ".into()));
            }
            let cov_term = covariance_term(cg.cov(), ct.cov())?;
            let items = video
                .par_iter()
                .map(|v| {
                    let dm = cg.mean_given(v.values())? - ct.mean_given(v.values())?;
                    let d2 = dm.norm_squared() + cov_term;
                    if !d2.is_finite() {
                        return Err(Error::Numerical("conditional Fréchet distance is not finite".into()));
                    }
                    Ok(d2.max(0.0))
                })
                .collect::<Result<Vec<f64>>>()?;
            (stats::mean(&items), items)
        }
    };
    Ok(CurveFd { mode, value, items })
}
