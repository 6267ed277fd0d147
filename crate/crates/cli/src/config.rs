//! Scenario configuration: one TOML file with an explicit schema version.

use crate::error::CliError;
use magdirac_core::discretize::Backend;
use magdirac_core::field::FieldModel;
use magdirac_core::mourre::SuiteConfig;
use magdirac_core::perturbation::ClassifyParams;
use magdirac_core::potential::PotentialSpec;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Analysis {
    InternalSpectrum,
    Gaps,
    FiberCheck,
    Mourre,
    Identities,
    Classify,
    GapEigenvalues,
    LapProbe,
    StructuralCheck,
    EssSpectrumProbe,
}

impl Analysis {
    pub const ALL: [Analysis; 10] = [
        Analysis::InternalSpectrum,
        Analysis::Gaps,
        Analysis::FiberCheck,
        Analysis::Mourre,
        Analysis::Identities,
        Analysis::Classify,
        Analysis::GapEigenvalues,
        Analysis::LapProbe,
        Analysis::StructuralCheck,
        Analysis::EssSpectrumProbe,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Analysis::InternalSpectrum => "internal-spectrum",
            Analysis::Gaps => "gaps",
            Analysis::FiberCheck => "fiber-check",
            Analysis::Mourre => "mourre",
            Analysis::Identities => "identities",
            Analysis::Classify => "classify",
            Analysis::GapEigenvalues => "gap-eigenvalues",
            Analysis::LapProbe => "lap-probe",
            Analysis::StructuralCheck => "structural-check",
            Analysis::EssSpectrumProbe => "ess-spectrum-probe",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == s)
    }

    pub fn prerequisites(self) -> &'static [Analysis] {
        match self {
            Analysis::Gaps | Analysis::FiberCheck => &[Analysis::InternalSpectrum],
            Analysis::Mourre | Analysis::GapEigenvalues => &[Analysis::Gaps],
            Analysis::LapProbe => &[Analysis::GapEigenvalues],
            Analysis::EssSpectrumProbe => &[Analysis::Classify, Analysis::Gaps],
            Analysis::InternalSpectrum | Analysis::Identities | Analysis::Classify | Analysis::StructuralCheck => &[],
        }
    }
}

impl fmt::Display for Analysis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// eigenpair residual target
    pub eig: f64,
    /// cluster merging in the symmetrized spectrum
    pub cluster: f64,
    /// inner linear solves
    pub inner: f64,
    /// relative floor for the structural inequalities
    pub structural: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            eig: 1e-10,
            cluster: 1e-8,
            inner: 1e-12,
            structural: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct XiGridSpec {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Default for XiGridSpec {
    fn default() -> Self {
        Self {
            lo: -5.0,
            hi: 5.0,
            points: 401,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumSection {
    /// restrict the internal spectrum to `[lo, hi]`; full spectrum when absent
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<[f64; 2]>,
    /// computed range `Λ` of the gap structure; 80th percentile when absent
    #[serde(skip_serializing_if = "Option::is_none")]
    pub range: Option<f64>,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self {
            window: None,
            range: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FiberCheckSection {
    pub xis: Vec<f64>,
}

impl Default for FiberCheckSection {
    fn default() -> Self {
        Self {
            xis: vec![0.0, 0.5, -0.5, 2.0, -2.0, 10.0, -10.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MourreSection {
    pub lambdas: Vec<f64>,
    pub epsilons: Vec<f64>,
    /// allowed shortfall of `ρ` below its lower bound
    pub margin: f64,
}

impl Default for MourreSection {
    fn default() -> Self {
        Self {
            lambdas: vec![1.3, 1.5, 1.6],
            epsilons: vec![0.05, 0.02, 0.01],
            margin: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GapSection {
    /// gap to search; the first positive gap when absent
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interval: Option<[f64; 2]>,
    pub margin_fraction: f64,
    pub stability_tol: f64,
    /// fiber momentum of the surrogate operator
    pub xi: f64,
    /// refinement ladder, coarse to fine; the main backend when empty
    pub ladder: Vec<Backend>,
}

impl Default for GapSection {
    fn default() -> Self {
        Self {
            interval: None,
            margin_fraction: 0.05,
            stability_tol: 1e-2,
            xi: 0.0,
            ladder: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LapSection {
    /// probe energy inside the gap; the gap centre when absent
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    pub epsilons: Vec<f64>,
    /// ladder used on a gap eigenvalue; when absent, `epsilons` rescaled so
    /// the largest is a tenth of the distance to the nearest other level
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eigen_epsilons: Option<Vec<f64>>,
    /// weight exponent `s` of `⟨x⟩^{−s}`
    pub s: f64,
    pub trials: usize,
}

impl Default for LapSection {
    fn default() -> Self {
        Self {
            lambda: None,
            epsilons: vec![1e-1, 3e-2, 1e-2, 3e-3],
            eigen_epsilons: None,
            s: 1.0,
            trials: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StructuralSection {
    pub n3: usize,
    pub half_length3: f64,
}

impl Default for StructuralSection {
    fn default() -> Self {
        Self {
            n3: 16,
            half_length3: 6.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EssentialSection {
    /// counting windows; derived around the first bands when empty
    pub windows: Vec<[f64; 2]>,
    /// the main backend when empty
    pub ladder: Vec<Backend>,
}

impl Default for EssentialSection {
    fn default() -> Self {
        Self {
            windows: Vec::new(),
            ladder: Vec::new(),
        }
    }
}

fn default_output() -> String {
    "magdirac-out".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    /// worker threads; 0 picks the number of cores
    #[serde(default)]
    pub threads: usize,
    #[serde(default = "default_output")]
    pub output: String,
    #[serde(default)]
    pub analyses: Vec<Analysis>,
    #[serde(default)]
    pub tolerances: Tolerances,
    pub field: FieldModel,
    pub backend: Backend,
    #[serde(default = "zero_potential")]
    pub potential: PotentialSpec,
    #[serde(default)]
    pub spectrum: SpectrumSection,
    #[serde(default)]
    pub xi_grid: XiGridSpec,
    #[serde(default)]
    pub fiber_check: FiberCheckSection,
    #[serde(default)]
    pub mourre: MourreSection,
    #[serde(default)]
    pub identities: SuiteConfig,
    #[serde(default)]
    pub classify: ClassifyParams,
    #[serde(default)]
    pub gap: GapSection,
    #[serde(default)]
    pub lap: LapSection,
    #[serde(default)]
    pub structural: StructuralSection,
    #[serde(default)]
    pub essential: EssentialSection,
}

fn zero_potential() -> PotentialSpec {
    PotentialSpec::Zero
}

impl ScenarioConfig {
    /// Parses and validates TOML text; schema errors name the field path.
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let de = toml::Deserializer::new(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let inner = e.inner();
            let mut message = inner.message().trim().to_string();
            if let Some(span) = inner.span() {
                let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
                message.push_str(&format!(" (line {line})"));
            }
            CliError::Schema {
                path: e.path().to_string(),
                message,
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Schema {
            path: ".".into(),
            message: e.to_string(),
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let schema = |path: &str, message: &str| CliError::Schema {
            path: path.into(),
            message: message.into(),
        };
        if self.schema_version != SCHEMA_VERSION {
            return Err(schema(
                "schema_version",
                &format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("tolerances.eig", t.eig),
            ("tolerances.cluster", t.cluster),
            ("tolerances.inner", t.inner),
            ("tolerances.structural", t.structural),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(schema(name, "tolerance must be positive"));
            }
        }
        self.field.validate().map_err(|e| schema("field", &e.to_string()))?;
        if self.xi_grid.points == 0 || !(self.xi_grid.lo <= self.xi_grid.hi) {
            return Err(schema("xi_grid", "need lo ≤ hi and at least one point"));
        }
        if self.mourre.epsilons.iter().any(|e| !(*e > 0.0)) {
            return Err(schema("mourre.epsilons", "window half-widths must be positive"));
        }
        if let Some([lo, hi]) = self.gap.interval {
            if !(lo < hi) {
                return Err(schema("gap.interval", "need lo < hi"));
            }
        }
        if !(0.0..0.5).contains(&self.gap.margin_fraction) {
            return Err(schema("gap.margin_fraction", "must lie in [0, 0.5)"));
        }
        if !(self.gap.stability_tol > 0.0) {
            return Err(schema("gap.stability_tol", "must be positive"));
        }
        let ladder_ok = |e: &[f64]| !e.is_empty() && e[e.len() - 1] > 0.0 && e.windows(2).all(|w| w[1] < w[0]);
        if !ladder_ok(&self.lap.epsilons) {
            return Err(schema("lap.epsilons", "must be positive and strictly decreasing"));
        }
        if self.lap.eigen_epsilons.as_deref().is_some_and(|e| !ladder_ok(e)) {
            return Err(schema("lap.eigen_epsilons", "must be positive and strictly decreasing"));
        }
        for a in &self.analyses {
            for p in a.prerequisites() {
                if !self.analyses.contains(p) {
                    return Err(schema(
                        "analyses",
                        &format!("analysis `{a}` requires `{p}` to be listed"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Requested analyses in dependency order.
    pub fn execution_order(&self) -> Result<Vec<Analysis>, CliError> {
        let edges: Vec<(Analysis, Analysis)> = self
            .analyses
            .iter()
            .flat_map(|&a| a.prerequisites().iter().map(move |&p| (p, a)))
            .collect();
        topological_order(&self.analyses, &edges)
    }
}

/// Kahn's algorithm; ties resolve in canonical analysis order.
pub fn topological_order(nodes: &[Analysis], edges: &[(Analysis, Analysis)]) -> Result<Vec<Analysis>, CliError> {
    let mut pending: Vec<Analysis> = nodes.to_vec();
    pending.sort();
    pending.dedup();
    let mut done = Vec::with_capacity(pending.len());
    while !pending.is_empty() {
        let ready = pending.iter().position(|&n| {
            edges
                .iter()
                .all(|&(from, to)| to != n || !pending.contains(&from))
        });
        match ready {
            Some(i) => done.push(pending.remove(i)),
            None => {
                return Err(CliError::Cycle(
                    pending.iter().map(|a| a.name()).collect::<Vec<_>>().join(", "),
                ))
            }
        }
    }
    Ok(done)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
schema_version = 1
analyses = ["internal-spectrum", "gaps"]

[field]
mass = 1.0
[field.profile]
kind = "constant"
b0 = 1.0

[backend]
kind = "oscillator"
levels = 10
"#;

    #[test]
    fn parses_minimal_config() {
        let c = ScenarioConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.backend, Backend::Oscillator { levels: 10, centres: 1 });
        assert_eq!(c.potential, PotentialSpec::Zero);
        assert_eq!(c.tolerances, Tolerances::default());
    }

    #[test]
    fn round_trip() {
        let mut c = ScenarioConfig::from_toml(MINIMAL).unwrap();
        c.gap.ladder = vec![
            Backend::Oscillator { levels: 10, centres: 20 },
            Backend::Grid { n: [16, 16], half_length: [4.0, 4.0] },
        ];
        c.potential = PotentialSpec::Gaussian { v0: -0.5, width: 1.0 };
        c.lap.lambda = Some(1.5);
        let text = c.to_toml().unwrap();
        assert_eq!(ScenarioConfig::from_toml(&text).unwrap(), c);
    }

    #[test]
    fn schema_errors_name_the_path() {
        let bad = MINIMAL.replace("b0 = 1.0", "b0 = \"one\"");
        match ScenarioConfig::from_toml(&bad) {
            Err(CliError::Schema { path, message }) => {
                assert!(path.starts_with("field.profile"), "{path}");
                assert!(message.contains("line 7"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        let bad = MINIMAL.replace("levels = 10", "levels = 10\nbogus = 1");
        assert!(matches!(ScenarioConfig::from_toml(&bad), Err(CliError::Schema { .. })));
        let bad = MINIMAL.replace("schema_version = 1", "schema_version = 9");
        match ScenarioConfig::from_toml(&bad) {
            Err(CliError::Schema { path, .. }) => assert_eq!(path, "schema_version"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn prerequisites_must_be_listed() {
        let bad = MINIMAL.replace(r#"["internal-spectrum", "gaps"]"#, r#"["gaps", "mourre"]"#);
        assert!(matches!(ScenarioConfig::from_toml(&bad), Err(CliError::Schema { .. })));
        let bad = MINIMAL.replace("[backend]", "[tolerances]\neig = -1.0\n\n[backend]");
        match ScenarioConfig::from_toml(&bad) {
            Err(CliError::Schema { path, .. }) => assert_eq!(path, "tolerances.eig"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dependency_order() {
        let mut c = ScenarioConfig::from_toml(MINIMAL).unwrap();
        c.analyses = vec![
            Analysis::LapProbe,
            Analysis::GapEigenvalues,
            Analysis::Gaps,
            Analysis::InternalSpectrum,
        ];
        let order = c.execution_order().unwrap();
        assert_eq!(
            order,
            vec![
                Analysis::InternalSpectrum,
                Analysis::Gaps,
                Analysis::GapEigenvalues,
                Analysis::LapProbe
            ]
        );
        let cyc = topological_order(
            &[Analysis::Gaps, Analysis::Mourre],
            &[(Analysis::Gaps, Analysis::Mourre), (Analysis::Mourre, Analysis::Gaps)],
        );
        assert!(matches!(cyc, Err(CliError::Cycle(_))));
    }

    #[test]
    fn names_round_trip() {
        for a in Analysis::ALL {
            assert_eq!(Analysis::from_name(a.name()), Some(a));
            let v: Analysis = serde_json::from_value(serde_json::Value::String(a.name().into())).unwrap();
            assert_eq!(v, a);
        }
    }
}
