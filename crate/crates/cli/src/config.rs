use std::fs;
use std::path::{Path, PathBuf};

use povsent::annotation::ImportMapping;
use povsent::datasets::{DEFAULT_SPLIT_SEED, DEFAULT_THRESHOLDS};
use povsent::prompting::{ExampleOrdering, PromptTemplate};
use povsent::{Averaging, Pov, RaterGroup, TiePolicy};
use povsent_modelio::{MockBehavior, ModelEndpoint, ParseFallback};
use serde::{Deserialize, Serialize};

use crate::error::{config_err, CliError, CliResult};
use crate::manifest::RunManifest;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    pub paths: Paths,
    /// Column layout of the annotation file; the long layout when absent.
    #[serde(default)]
    pub annotation_import: Option<ImportMapping>,
    #[serde(default)]
    pub agreement: AgreementSettings,
    #[serde(default)]
    pub datasets: DatasetSettings,
    #[serde(default)]
    pub splits: SplitSettings,
    #[serde(default)]
    pub prompting: PromptSettings,
    #[serde(default)]
    pub endpoint: Option<ModelEndpoint>,
    #[serde(default)]
    pub mock: MockSettings,
    #[serde(default)]
    pub eval: EvalSettings,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub lexicon: PathBuf,
    pub sentences: PathBuf,
    pub annotations: PathBuf,
    #[serde(default)]
    pub test_set: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgreementSettings {
    pub raters_per_group: usize,
    pub tie_policy: TiePolicy,
    /// Terms averaged together in the report's subset line.
    pub subset_terms: Vec<String>,
}

impl Default for AgreementSettings {
    fn default() -> Self {
        Self {
            raters_per_group: 10,
            tie_policy: TiePolicy::PreferNeutral,
            subset_terms: vec!["compliant".into(), "adherent".into(), "malingering".into()],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSettings {
    pub thresholds: Vec<f64>,
}

impl Default for DatasetSettings {
    fn default() -> Self {
        Self {
            thresholds: DEFAULT_THRESHOLDS.to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSettings {
    /// Train share of the classification split.
    pub classification_train_fraction: f64,
    /// Example-pool share of the prompt split.
    pub prompt_train_fraction: f64,
    pub seed: u64,
    /// Shuffle within each label of the physician view instead of globally.
    pub stratified: bool,
}

impl Default for SplitSettings {
    fn default() -> Self {
        Self {
            classification_train_fraction: 0.7,
            prompt_train_fraction: 0.3,
            seed: DEFAULT_SPLIT_SEED,
            stratified: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PromptSettings {
    pub physician_template: Option<PathBuf>,
    pub non_physician_template: Option<PathBuf>,
    pub example_ordering: ExampleOrdering,
}

impl Default for PromptSettings {
    fn default() -> Self {
        Self {
            physician_template: None,
            non_physician_template: None,
            example_ordering: ExampleOrdering::Seeded(DEFAULT_SPLIT_SEED),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockSettings {
    pub behavior: MockBehavior,
}

impl Default for MockSettings {
    fn default() -> Self {
        Self {
            behavior: MockBehavior::Echo,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSettings {
    pub parse_fallback: ParseFallback,
    pub averaging: Averaging,
    /// Parse failures tolerated per evaluation before the run fails.
    pub max_unresolved: usize,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            parse_fallback: ParseFallback::RetryStricter,
            averaging: Averaging::PresentInGold,
            max_unresolved: 0,
        }
    }
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

fn require_file(key: &str, p: &Path) -> CliResult<()> {
    if p.is_file() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{key}: file not found: {}", p.display())))
    }
}

impl RunConfig {
    /// Loads a TOML config, or the config snapshot inside a run manifest.
    /// Relative paths resolve against the file's directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = if path.extension().is_some_and(|e| e == "json") {
            let m: RunManifest = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            m.config
        } else {
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        };
        let full = path.canonicalize().unwrap_or_else(|_| path.to_path_buf());
        let base = full.parent().unwrap_or(Path::new(".")).to_path_buf();
        cfg.resolve_paths(&base);
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        resolve(base, &mut self.output_dir);
        resolve(base, &mut self.paths.lexicon);
        resolve(base, &mut self.paths.sentences);
        resolve(base, &mut self.paths.annotations);
        if let Some(p) = self.paths.test_set.as_mut() {
            resolve(base, p);
        }
        if let Some(p) = self.prompting.physician_template.as_mut() {
            resolve(base, p);
        }
        if let Some(p) = self.prompting.non_physician_template.as_mut() {
            resolve(base, p);
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        require_file("paths.lexicon", &self.paths.lexicon)?;
        require_file("paths.sentences", &self.paths.sentences)?;
        require_file("paths.annotations", &self.paths.annotations)?;
        if let Some(p) = &self.paths.test_set {
            require_file("paths.test_set", p)?;
        }
        if let Some(p) = &self.prompting.physician_template {
            require_file("prompting.physician_template", p)?;
        }
        if let Some(p) = &self.prompting.non_physician_template {
            require_file("prompting.non_physician_template", p)?;
        }
        for (key, f) in [
            ("splits.classification_train_fraction", self.splits.classification_train_fraction),
            ("splits.prompt_train_fraction", self.splits.prompt_train_fraction),
        ] {
            if !(f > 0.0 && f < 1.0) {
                return Err(CliError::Config(format!("{key} must be in (0, 1), got {f}")));
            }
        }
        if let Some(t) = self.datasets.thresholds.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
            return Err(CliError::Config(format!("datasets.thresholds must be in (0, 1], got {t}")));
        }
        if let Some(ep) = &self.endpoint {
            ep.validate().map_err(|e| CliError::Config(format!("endpoint: {e}")))?;
        }
        Ok(())
    }

    pub fn template(&self, pov: Pov) -> CliResult<PromptTemplate> {
        let path = match pov {
            RaterGroup::Physician => &self.prompting.physician_template,
            RaterGroup::NonPhysician => &self.prompting.non_physician_template,
        };
        let t = match path {
            Some(p) => PromptTemplate::load(p).map_err(config_err)?,
            None => PromptTemplate::default_for(pov),
        };
        if t.pov() != pov {
            return Err(CliError::Config(format!("template for {pov} declares pov {}", t.pov())));
        }
        Ok(t)
    }
}
