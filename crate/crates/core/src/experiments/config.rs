//! Experiment configuration: JSON schema and shipped presets.

use super::ExperimentError;
use crate::matrix::EnsembleKind;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    CFree,
    Infinitesimal,
    Fluctuation,
    Ordered,
    Indented,
    Concentration,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::CFree => "cfree",
            ExperimentKind::Infinitesimal => "infinitesimal",
            ExperimentKind::Fluctuation => "fluctuation",
            ExperimentKind::Ordered => "ordered",
            ExperimentKind::Indented => "indented",
            ExperimentKind::Concentration => "concentration",
        }
    }
}

/// How a preset word is turned into the polynomial actually measured.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CenteringRule {
    /// The word itself.
    Raw,
    /// Every alternating block centered against its family's exact size-N
    /// trace functional (the polynomial then depends on N).
    PsiFiniteN,
    /// Every alternating block centered against the family's limiting trace.
    PsiLimit,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WordEntry {
    pub word: String,
    #[serde(default = "default_centering")]
    pub center: CenteringRule,
}

fn default_centering() -> CenteringRule {
    CenteringRule::Raw
}

impl WordEntry {
    pub fn raw(word: &str) -> Self {
        WordEntry { word: word.to_string(), center: CenteringRule::Raw }
    }

    pub fn centered_finite(word: &str) -> Self {
        WordEntry { word: word.to_string(), center: CenteringRule::PsiFiniteN }
    }

    pub fn centered_limit(word: &str) -> Self {
        WordEntry { word: word.to_string(), center: CenteringRule::PsiLimit }
    }

    /// Row label: the word plus a centering marker.
    pub fn label(&self) -> String {
        match self.center {
            CenteringRule::Raw => self.word.clone(),
            CenteringRule::PsiFiniteN => format!("c[{}]", self.word),
            CenteringRule::PsiLimit => format!("cl[{}]", self.word),
        }
    }
}

/// Either a shipped named word suite or an explicit list.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WordSuite {
    Preset { preset: String },
    Explicit { list: Vec<WordEntry> },
}

impl WordSuite {
    pub fn resolve(&self) -> Result<Vec<WordEntry>, ExperimentError> {
        match self {
            WordSuite::Explicit { list } => Ok(list.clone()),
            WordSuite::Preset { preset } => word_preset(preset)
                .ok_or_else(|| ExperimentError::Config(format!("unknown word preset `{preset}`"))),
        }
    }
}

/// Distinguished unit vectors for the vector states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VectorSpec {
    E1,
    E2,
    E3,
    AllOnes,
    Explicit(Vec<f64>),
}

impl VectorSpec {
    pub fn build(&self, n: usize) -> Result<Vec<crate::scalar::C64>, ExperimentError> {
        use num::complex::Complex64;
        let basis = |k: usize| {
            let mut v = vec![Complex64::new(0.0, 0.0); n];
            v[k] = Complex64::new(1.0, 0.0);
            v
        };
        match self {
            VectorSpec::E1 => Ok(basis(0)),
            VectorSpec::E2 => Ok(basis(1)),
            VectorSpec::E3 => Ok(basis(2)),
            VectorSpec::AllOnes => {
                let c = Complex64::new(1.0 / (n as f64).sqrt(), 0.0);
                Ok(vec![c; n])
            }
            VectorSpec::Explicit(entries) => {
                if entries.len() != n {
                    return Err(ExperimentError::Config(format!(
                        "explicit vector has length {}, expected {n}",
                        entries.len()
                    )));
                }
                let norm: f64 = entries.iter().map(|x| x * x).sum::<f64>().sqrt();
                if (norm - 1.0).abs() > 1e-10 {
                    return Err(ExperimentError::Config(format!(
                        "explicit vector must be unit norm, got {norm}"
                    )));
                }
                Ok(entries.iter().map(|&x| Complex64::new(x, 0.0)).collect())
            }
        }
    }
}

/// One deterministic ensemble: family label plus the matrix recipe.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub family: u32,
    #[serde(flatten)]
    pub kind: EnsembleKind,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub dims: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    #[serde(default = "default_zmax")]
    pub zmax: f64,
    pub ensembles: Vec<EnsembleSpec>,
    #[serde(default)]
    pub vectors: Vec<VectorSpec>,
    pub words: WordSuite,
    #[serde(default)]
    pub out_csv: Option<PathBuf>,
    #[serde(default)]
    pub out_summary: Option<PathBuf>,
    #[serde(default)]
    pub threads: Option<usize>,
}

fn default_zmax() -> f64 {
    3.0
}

/// Minimum trial count for the fluctuation experiment; below it the
/// higher-moment estimates are meaningless and the run is refused.
pub const FLUCTUATION_TRIALS_FLOOR: usize = 1000;

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.dims.is_empty() {
            return Err(ExperimentError::Config("dims must be nonempty".into()));
        }
        if self.dims.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ExperimentError::Config("dims must be strictly ascending".into()));
        }
        if self.trials < 2 {
            return Err(ExperimentError::Config("trials must be at least 2".into()));
        }
        if self.kind == ExperimentKind::Fluctuation && self.trials < FLUCTUATION_TRIALS_FLOOR {
            return Err(ExperimentError::Config(format!(
                "fluctuation experiment needs at least {FLUCTUATION_TRIALS_FLOOR} trials, got {}",
                self.trials
            )));
        }
        if self.words.resolve()?.is_empty() {
            return Err(ExperimentError::Config("word list must be nonempty".into()));
        }
        if self.ensembles.is_empty() {
            return Err(ExperimentError::Config("need at least one ensemble".into()));
        }
        let mut fams: Vec<u32> = self.ensembles.iter().map(|e| e.family).collect();
        fams.sort_unstable();
        fams.dedup();
        if fams.len() != self.ensembles.len() {
            return Err(ExperimentError::Config("duplicate ensemble family".into()));
        }
        for spec in &self.ensembles {
            if let EnsembleKind::SpikedAlternating { .. } = spec.kind {
                if self.dims.iter().any(|d| d % 2 != 0) {
                    return Err(ExperimentError::Config(
                        "spiked_alternating ensembles need even dims".into(),
                    ));
                }
            }
            if let EnsembleKind::TwoSpectrum { values } = &spec.kind {
                if self.dims.iter().any(|d| d % values.len() != 0) {
                    return Err(ExperimentError::Config(
                        "two_spectrum ensembles need dims divisible by the spectrum length"
                            .into(),
                    ));
                }
            }
        }
        match self.kind {
            ExperimentKind::Ordered => {
                if self.vectors.len() != 2 {
                    return Err(ExperimentError::Config(
                        "ordered experiment needs exactly two vectors (u, v)".into(),
                    ));
                }
            }
            ExperimentKind::Indented => {
                if self.vectors.len() != 3 {
                    return Err(ExperimentError::Config(
                        "indented experiment needs a triad (u, v, w)".into(),
                    ));
                }
            }
            _ => {
                if self.vectors.len() != 1 {
                    return Err(ExperimentError::Config(
                        "experiment needs exactly one fixed vector".into(),
                    ));
                }
            }
        }
        if matches!(self.kind, ExperimentKind::Infinitesimal) {
            for w in self.words.resolve()? {
                if w.center == CenteringRule::PsiFiniteN {
                    return Err(ExperimentError::Config(
                        "infinitesimal fits need N-independent observables; \
                         use raw or psi_limit centering"
                            .into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Shipped word suites.
pub fn word_preset(name: &str) -> Option<Vec<WordEntry>> {
    match name {
        // Lengths 1-4, raw and centered, both orders.
        "cfree-basic" => Some(vec![
            WordEntry::raw("X0"),
            WordEntry::raw("Y0"),
            WordEntry::raw("X0^2"),
            WordEntry::raw("Y0^2"),
            WordEntry::raw("X0*Y0"),
            WordEntry::centered_finite("X0*Y0"),
            WordEntry::raw("X0^2*Y0"),
            WordEntry::centered_finite("X0*Y0^2"),
            WordEntry::raw("X0*Y0*X0"),
            WordEntry::raw("X0^2*Y0^2"),
            WordEntry::raw("X0*Y0*X0*Y0"),
            WordEntry::centered_finite("X0*Y0*X0*Y0"),
        ]),
        "infinitesimal-basic" => Some(vec![
            WordEntry::raw("X0^2"),
            WordEntry::raw("X0*Y0"),
            WordEntry::raw("X0*Y0^2"),
            WordEntry::raw("X0*Y0*X0*Y0"),
            WordEntry::centered_limit("X0*Y0"),
            WordEntry::centered_limit("X0^2*Y0"),
        ]),
        "fluctuation-basic" => Some(vec![
            WordEntry::centered_limit("X0*Y0*X0*Y0"),
            WordEntry::centered_limit("X0^2*Y0^2"),
        ]),
        "ordered-basic" | "indented-basic" => Some(vec![
            WordEntry::raw("X0"),
            WordEntry::raw("Y0"),
            WordEntry::raw("X0^2"),
            WordEntry::raw("Y0^2"),
            WordEntry::raw("X0*Y0"),
            WordEntry::raw("Y0*X0*Y0"),
            WordEntry::raw("X0*Y0*X0"),
            WordEntry::raw("X0*Y0*X0*Y0"),
        ]),
        "concentration-basic" => Some(vec![
            WordEntry::raw("1"),
            WordEntry::raw("X0^2"),
            WordEntry::raw("X0*Y0"),
            WordEntry::raw("X0*Y0*X0*Y0"),
        ]),
        _ => None,
    }
}

/// Full shipped configurations, keyed by the same names as the word suites.
pub fn preset_config(name: &str) -> Option<ExperimentConfig> {
    // Spikes aligned with e1 keep every vector-state row exactly computable;
    // the alternating bulks keep the rotated traces genuinely random while
    // the trace expansions in 1/N stay exact.
    let spiked_pair = vec![
        EnsembleSpec { family: 0, kind: EnsembleKind::SpikedAlternating { theta: 2.0, bulk: 0.5 } },
        EnsembleSpec { family: 1, kind: EnsembleKind::SpikedAlternating { theta: 3.0, bulk: 1.0 } },
    ];
    let two_spectrum_pair = vec![
        EnsembleSpec { family: 0, kind: EnsembleKind::TwoSpectrum { values: vec![2.0, -1.0] } },
        EnsembleSpec { family: 1, kind: EnsembleKind::TwoSpectrum { values: vec![3.0, -1.0] } },
    ];
    // Milder spectra for the vector-state models: the finite-size coupling
    // error scales with the spectral variance while the Monte Carlo noise
    // scales with its square root, so flatter bulks sharpen the z-tests.
    let mild_pair = vec![
        EnsembleSpec { family: 0, kind: EnsembleKind::TwoSpectrum { values: vec![1.0, 0.0] } },
        EnsembleSpec { family: 1, kind: EnsembleKind::TwoSpectrum { values: vec![1.0, -1.0] } },
    ];
    let cfg = |kind, dims: Vec<usize>, trials, ensembles, vectors| ExperimentConfig {
        kind,
        dims,
        trials,
        seed: 20_24,
        zmax: 3.0,
        ensembles,
        vectors,
        words: WordSuite::Preset { preset: name.to_string() },
        out_csv: None,
        out_summary: None,
        threads: None,
    };
    match name {
        "cfree-basic" => Some(cfg(
            ExperimentKind::CFree,
            vec![32, 64, 128, 256],
            2000,
            spiked_pair,
            vec![VectorSpec::E1],
        )),
        "infinitesimal-basic" => Some(cfg(
            ExperimentKind::Infinitesimal,
            vec![32, 64, 128, 256],
            2000,
            spiked_pair,
            vec![VectorSpec::E1],
        )),
        "fluctuation-basic" => Some(cfg(
            ExperimentKind::Fluctuation,
            vec![128],
            10_000,
            two_spectrum_pair,
            vec![VectorSpec::E1],
        )),
        "ordered-basic" => Some(cfg(
            ExperimentKind::Ordered,
            vec![64, 256],
            150,
            mild_pair.clone(),
            vec![VectorSpec::E1, VectorSpec::E2],
        )),
        "indented-basic" => Some(cfg(
            ExperimentKind::Indented,
            vec![64, 256],
            150,
            mild_pair,
            vec![VectorSpec::E1, VectorSpec::E2, VectorSpec::E3],
        )),
        "concentration-basic" => Some(cfg(
            ExperimentKind::Concentration,
            vec![32, 64, 128, 256],
            1000,
            spiked_pair,
            // The all-ones axis is not an eigenvector of either ensemble, so
            // the vector-state rows fluctuate and their decay is informative.
            vec![VectorSpec::AllOnes],
        )),
        _ => None,
    }
}

/// Names of all shipped presets.
pub fn preset_names() -> Vec<&'static str> {
    vec![
        "cfree-basic",
        "infinitesimal-basic",
        "fluctuation-basic",
        "ordered-basic",
        "indented-basic",
        "concentration-basic",
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for name in preset_names() {
            let cfg = preset_config(name).unwrap();
            cfg.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        assert!(preset_config("nope").is_none());
    }

    #[test]
    fn validation_catches_bad_configs() {
        let mut cfg = preset_config("cfree-basic").unwrap();
        cfg.dims = vec![64, 32];
        assert!(cfg.validate().is_err());

        let mut cfg = preset_config("fluctuation-basic").unwrap();
        cfg.trials = 100;
        assert!(cfg.validate().is_err());

        let mut cfg = preset_config("cfree-basic").unwrap();
        cfg.vectors = vec![];
        assert!(cfg.validate().is_err());

        let mut cfg = preset_config("infinitesimal-basic").unwrap();
        cfg.words = WordSuite::Explicit { list: vec![WordEntry::centered_finite("X0*Y0")] };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = preset_config("cfree-basic").unwrap();
        let json = serde_json::to_string_pretty(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
        back.validate().unwrap();
        assert_eq!(back.dims, cfg.dims);
        assert_eq!(back.seed, cfg.seed);
    }
}
