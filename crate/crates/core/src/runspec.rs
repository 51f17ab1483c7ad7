//! JSON run specifications and the experiment runner behind the CLI.
//!
//! Minimal spec:
//!
//! ```json
//! { "scene": { "builtin": "1T_AB" }, "experiment": "single-run" }
//! ```
//!
//! Omitted radar fields take the RadarBook2 defaults. The top-level `seed`
//! replaces the noise seed of the scene, so every random draw of a run
//! derives from it.

use std::collections::BTreeMap;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cfar::{CfarConfig, CfarKind};
use crate::cluster::DbscanParams;
use crate::dsp::{DspConfig, Preprocessor};
use crate::error::{Error, Result};
use crate::eval::{self, log_grid, RocOptions, RocPoint, ABLATION_SUBSETS};
use crate::export::{self, MetricsRow};
use crate::params::RadarParams;
use crate::pipeline::{run_pipeline, PipelineConfig, PipelineKind};
use crate::scenarios::{builtin_scenarios, scenario};
use crate::scene::Scene;
use crate::synth::{synthesize_cube, synthesize_frame};
use crate::tracker::TrackerConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    SingleRun,
    RocSweep,
    Ablation,
    ScenarioSuite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum SceneSpec {
    Builtin(String),
    Custom(Scene),
}

impl SceneSpec {
    pub fn build(&self, seed: u64) -> Result<Scene> {
        match self {
            SceneSpec::Builtin(name) => scenario(name, seed),
            SceneSpec::Custom(s) => {
                let mut s = s.clone();
                s.seed = seed;
                Ok(s)
            }
        }
    }

    pub fn name(&self) -> &str {
        match self {
            SceneSpec::Builtin(name) => name,
            SceneSpec::Custom(_) => "custom",
        }
    }
}

fn default_kind() -> PipelineKind {
    PipelineKind::Ra
}

/// One pipeline of a run. Omitted parts take the library defaults for the
/// run's radar; `tracker` defaults to noise levels matched to `channels`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineSpec {
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default = "default_kind")]
    pub kind: PipelineKind,
    #[serde(default)]
    pub channels: Option<usize>,
    #[serde(default)]
    pub dsp: DspConfig,
    #[serde(default)]
    pub cfar: CfarConfig,
    #[serde(default)]
    pub peak_grouping: bool,
    #[serde(default)]
    pub cluster: DbscanParams,
    #[serde(default)]
    pub tracker: Option<TrackerConfig>,
}

impl PipelineSpec {
    pub fn new(kind: PipelineKind) -> Self {
        Self {
            label: None,
            kind,
            channels: None,
            dsp: DspConfig::default(),
            cfar: CfarConfig::default(),
            peak_grouping: false,
            cluster: DbscanParams::default(),
            tracker: None,
        }
    }

    pub fn resolve(&self, params: &RadarParams) -> Result<PipelineConfig> {
        let channels = self.channels.unwrap_or(params.n_virtual_channels);
        let cfg = PipelineConfig {
            kind: self.kind,
            channels,
            dsp: self.dsp,
            cfar: self.cfar,
            peak_grouping: self.peak_grouping,
            cluster: self.cluster,
            tracker: self.tracker.unwrap_or_else(|| {
                let mut t = TrackerConfig::for_radar(params, channels.max(1));
                t.frame_period = 1.0 / params.frame_rate_hz;
                t
            }),
        };
        cfg.validate(params)?;
        Ok(cfg)
    }

    pub fn label(&self, params: &RadarParams) -> String {
        self.label
            .clone()
            .unwrap_or_else(|| format!("{}_{}ch", self.kind, self.channels.unwrap_or(params.n_virtual_channels)))
    }
}

fn default_roc_pipelines() -> Vec<PipelineKind> {
    vec![PipelineKind::Ra, PipelineKind::Rd]
}

fn default_roc_cfar() -> Vec<CfarKind> {
    vec![CfarKind::Ca, CfarKind::Os]
}

fn default_roc_grid() -> Vec<(usize, usize)> {
    vec![(4, 1), (8, 2)]
}

fn default_pfa_grid() -> Vec<f64> {
    log_grid(1e-6, 0.5, 16)
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RocSpec {
    #[serde(default = "default_roc_pipelines")]
    pub pipelines: Vec<PipelineKind>,
    #[serde(default = "default_roc_cfar")]
    pub cfar: Vec<CfarKind>,
    /// `(training, guard)` cell pairs.
    #[serde(default = "default_roc_grid")]
    pub grid: Vec<(usize, usize)>,
    #[serde(default = "default_pfa_grid")]
    pub design_pfa: Vec<f64>,
    /// Independent noise realisations of the scene, seeds `seed..seed+runs`.
    #[serde(default = "one")]
    pub runs: usize,
    #[serde(default)]
    pub options: RocOptions,
}

impl Default for RocSpec {
    fn default() -> Self {
        Self {
            pipelines: default_roc_pipelines(),
            cfar: default_roc_cfar(),
            grid: default_roc_grid(),
            design_pfa: default_pfa_grid(),
            runs: 1,
            options: RocOptions::default(),
        }
    }
}

fn default_subsets() -> Vec<usize> {
    ABLATION_SUBSETS.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblationSpec {
    #[serde(default = "default_subsets")]
    pub subsets: Vec<usize>,
}

impl Default for AblationSpec {
    fn default() -> Self {
        Self { subsets: default_subsets() }
    }
}

fn default_suite() -> Vec<String> {
    builtin_scenarios().iter().map(|s| s.name.to_string()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteSpec {
    #[serde(default = "default_suite")]
    pub scenarios: Vec<String>,
}

impl Default for SuiteSpec {
    fn default() -> Self {
        Self { scenarios: default_suite() }
    }
}

fn default_output() -> PathBuf {
    PathBuf::from("runs/latest")
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    #[serde(default)]
    pub radar: RadarParams,
    /// Required by every experiment except `scenario-suite`.
    #[serde(default)]
    pub scene: Option<SceneSpec>,
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    /// Defaults to one RA pipeline on the full array.
    #[serde(default)]
    pub pipelines: Vec<PipelineSpec>,
    #[serde(default)]
    pub roc: RocSpec,
    #[serde(default)]
    pub ablation: AblationSpec,
    #[serde(default)]
    pub suite: SuiteSpec,
    /// Write per-frame map and mask images in single runs.
    #[serde(default = "yes")]
    pub write_images: bool,
}

impl RunSpec {
    pub fn new(scene: SceneSpec, experiment: ExperimentKind) -> Self {
        Self {
            radar: RadarParams::default(),
            scene: Some(scene),
            experiment,
            seed: 0,
            output_dir: default_output(),
            pipelines: Vec::new(),
            roc: RocSpec::default(),
            ablation: AblationSpec::default(),
            suite: SuiteSpec::default(),
            write_images: true,
        }
    }

    /// Parses and validates a spec; `origin` only labels error messages.
    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let spec: RunSpec = serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            let inner = e.into_inner();
            let message = if field.is_empty() || field == "." {
                inner.to_string()
            } else {
                format!("`{field}`: {inner}")
            };
            Error::Spec {
                path: origin.to_path_buf(),
                message,
            }
        })?;
        spec.validate().map_err(|e| Error::Spec {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run spec serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.radar.validate()?;
        if self.experiment != ExperimentKind::ScenarioSuite && self.scene.is_none() {
            return Err(Error::invalid("scene", "required for this experiment"));
        }
        if let Some(SceneSpec::Builtin(name)) = &self.scene {
            scenario(name, 0)?;
        }
        if let Some(SceneSpec::Custom(s)) = &self.scene {
            s.validate()?;
        }
        for p in self.pipeline_specs() {
            p.resolve(&self.radar)?;
        }
        let mut labels: Vec<String> = self.pipeline_specs().iter().map(|p| p.label(&self.radar)).collect();
        labels.sort();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("pipelines", "labels must be unique"));
        }
        match self.experiment {
            ExperimentKind::RocSweep => {
                let r = &self.roc;
                if r.pipelines.is_empty() || r.cfar.is_empty() || r.grid.is_empty() || r.design_pfa.is_empty() || r.runs == 0 {
                    return Err(Error::invalid("roc", "pipelines, cfar, grid, design_pfa and runs must be non-empty"));
                }
                for &(t, g) in &r.grid {
                    for &p in &r.design_pfa {
                        CfarConfig::new(CfarKind::Ca, t, g, p).validate()?;
                    }
                }
            }
            ExperimentKind::Ablation => {
                if self.ablation.subsets.is_empty() {
                    return Err(Error::invalid("ablation.subsets", "must be non-empty"));
                }
                for &n in &self.ablation.subsets {
                    for p in self.pipeline_specs() {
                        p.resolve(&self.radar)?.with_channels(n, &self.radar).validate(&self.radar)?;
                    }
                }
            }
            ExperimentKind::ScenarioSuite => {
                for name in &self.suite.scenarios {
                    scenario(name, 0)?;
                }
            }
            ExperimentKind::SingleRun => {}
        }
        Ok(())
    }

    /// The configured pipelines, or the default RA pipeline.
    pub fn pipeline_specs(&self) -> Vec<PipelineSpec> {
        if self.pipelines.is_empty() {
            vec![PipelineSpec::new(PipelineKind::Ra)]
        } else {
            self.pipelines.clone()
        }
    }

    fn scene(&self) -> Result<Scene> {
        self.scene
            .as_ref()
            .ok_or_else(|| Error::invalid("scene", "required for this experiment"))?
            .build(self.seed)
    }
}

/// Reads and validates a spec file.
pub fn parse_runspec(path: &Path) -> Result<RunSpec> {
    let text = fs::read_to_string(path).map_err(|e| Error::Spec {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    RunSpec::from_json(&text, path)
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    config_hash: String,
    seed: u64,
    experiment: ExperimentKind,
    crate_version: &'static str,
    stage_seconds: &'a BTreeMap<String, f64>,
    files: &'a [String],
}

/// What a run wrote.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub files: Vec<String>,
    pub config_hash: String,
}

struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
    stages: BTreeMap<String, f64>,
}

impl Outputs {
    fn create(&mut self, rel: &str) -> Result<BufWriter<fs::File>> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        self.files.push(rel.to_string());
        Ok(BufWriter::new(fs::File::create(path)?))
    }

    fn timed<T>(&mut self, stage: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let out = f(self)?;
        *self.stages.entry(stage.to_string()).or_default() += t.elapsed().as_secs_f64();
        Ok(out)
    }
}

/// Executes the experiment of `spec` and writes its run directory.
pub fn run(spec: &RunSpec) -> Result<RunSummary> {
    spec.validate()?;
    fs::create_dir_all(&spec.output_dir)?;
    let spec_json = spec.to_json();
    let config_hash = {
        let mut anchored = spec.clone();
        anchored.output_dir = PathBuf::new();
        hex::encode(Sha256::digest(anchored.to_json().as_bytes()))
    };
    let mut out = Outputs {
        dir: spec.output_dir.clone(),
        files: Vec::new(),
        stages: BTreeMap::new(),
    };
    fs::write(out.dir.join("spec.json"), &spec_json)?;
    out.files.push("spec.json".into());
    fs::write(out.dir.join("README.md"), export::RUN_README)?;
    out.files.push("README.md".into());

    match spec.experiment {
        ExperimentKind::SingleRun => single_run(spec, &mut out)?,
        ExperimentKind::RocSweep => roc_sweep(spec, &mut out)?,
        ExperimentKind::Ablation => ablation(spec, &mut out)?,
        ExperimentKind::ScenarioSuite => suite(spec, &mut out)?,
    }

    out.files.push("manifest.json".into());
    let manifest = Manifest {
        config_hash: config_hash.clone(),
        seed: spec.seed,
        experiment: spec.experiment,
        crate_version: env!("CARGO_PKG_VERSION"),
        stage_seconds: &out.stages,
        files: &out.files,
    };
    fs::write(out.dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(RunSummary {
        dir: out.dir,
        files: out.files,
        config_hash,
    })
}

fn single_run(spec: &RunSpec, out: &mut Outputs) -> Result<()> {
    let scene = spec.scene()?;
    let cube = out.timed("synthesize", |_| synthesize_cube(&scene, &spec.radar).map_err(|e| e.in_stage("synthesize")))?;
    let truth = scene.ground_truth(&spec.radar);
    let pipes = spec.pipeline_specs();
    let nested = pipes.len() > 1;
    let mut metrics = Vec::new();
    for p in &pipes {
        let label = p.label(&spec.radar);
        let cfg = p.resolve(&spec.radar)?;
        let result = out.timed(&format!("pipeline {label}"), |_| run_pipeline(&cube, &cfg))?;
        let prefix = if nested { format!("{label}/") } else { String::new() };
        out.timed("write", |o| {
            export::write_tracks_csv(o.create(&format!("{prefix}tracks.csv"))?, result.snapshots().copied())?;
            export::write_points_csv(o.create(&format!("{prefix}points.csv"))?, &result.frames)?;
            export::write_runtime_csv(o.create(&format!("{prefix}runtime.csv"))?, &result.runtimes)?;
            if spec.write_images {
                export::write_frame_images(&o.dir.join(&prefix), &result.frames)?;
                o.files.push(format!("{prefix}maps/"));
                o.files.push(format!("{prefix}masks/"));
            }
            Ok(())
        })?;
        metrics.push((label, cfg, eval::track_metrics(&result, &truth)));
    }
    let name = spec.scene.as_ref().map(SceneSpec::name).unwrap_or("custom").to_string();
    out.timed("write", |o| {
        let rows = metrics.iter().map(|(label, cfg, m)| MetricsRow {
            label: if nested { label } else { &name },
            pipeline: cfg.kind.name(),
            channels: cfg.channels,
            metrics: m,
        });
        export::write_metrics_csv(o.create("metrics.csv")?, rows)?;
        Ok(())
    })
}

fn roc_sweep(spec: &RunSpec, out: &mut Outputs) -> Result<()> {
    let r = &spec.roc;
    let mut points: Vec<RocPoint> = Vec::new();
    for &kind in &r.pipelines {
        let maps = out.timed(&format!("maps {kind}"), |_| {
            let mut all: Option<eval::LabeledMaps> = None;
            for run in 0..r.runs {
                let scene = spec.scene.as_ref().expect("validated").build(spec.seed.wrapping_add(run as u64))?;
                let lm = eval::labeled_maps(&scene, &spec.radar, kind, &r.options).map_err(|e| e.in_stage("roc maps"))?;
                match all.as_mut() {
                    None => all = Some(lm),
                    Some(a) => {
                        a.maps.extend(lm.maps);
                        a.labels.extend(lm.labels);
                    }
                }
            }
            Ok(all.expect("runs >= 1"))
        })?;
        for &cfar in &r.cfar {
            let pts = out.timed(&format!("roc {kind} {}", cfar.name()), |_| {
                eval::roc_from_maps(&maps, cfar, &r.grid, &r.design_pfa, r.options.os_rank_fraction).map_err(|e| e.in_stage("roc"))
            })?;
            points.extend(pts);
        }
    }
    out.timed("write", |o| Ok(export::write_roc_csv(o.create("roc.csv")?, &points)?))
}

fn ablation(spec: &RunSpec, out: &mut Outputs) -> Result<()> {
    let scene = spec.scene()?;
    let cube = out.timed("synthesize", |_| synthesize_cube(&scene, &spec.radar).map_err(|e| e.in_stage("synthesize")))?;
    let truth = scene.ground_truth(&spec.radar);
    let mut rows = Vec::new();
    for p in spec.pipeline_specs() {
        let label = p.label(&spec.radar);
        let cfg = p.resolve(&spec.radar)?;
        let table = out.timed(&format!("ablation {label}"), |_| {
            eval::channel_ablation_on_cube(&cube, &truth, &cfg, &spec.ablation.subsets)
        })?;
        rows.push((label, cfg.kind, table));
    }
    out.timed("write", |o| {
        let mut w = o.create("ablation.csv")?;
        export::write_ablation_csv(&mut w, rows.iter().flat_map(|(label, kind, t)| t.iter().map(move |r| (label.as_str(), kind.name(), r))))?;
        Ok(())
    })
}

fn suite(spec: &RunSpec, out: &mut Outputs) -> Result<()> {
    let mut results = Vec::new();
    for name in &spec.suite.scenarios {
        let scene = scenario(name, spec.seed)?;
        let cube = out.timed("synthesize", |_| synthesize_cube(&scene, &spec.radar).map_err(|e| e.in_stage("synthesize")))?;
        let truth = scene.ground_truth(&spec.radar);
        for p in spec.pipeline_specs() {
            let label = p.label(&spec.radar);
            let cfg = p.resolve(&spec.radar)?;
            let result = out.timed(&format!("pipeline {label}"), |_| run_pipeline(&cube, &cfg))?;
            out.timed("write", |o| {
                Ok(export::write_tracks_csv(o.create(&format!("tracks/{name}_{label}.csv"))?, result.snapshots().copied())?)
            })?;
            results.push((name.clone(), cfg, eval::track_metrics(&result, &truth)));
        }
    }
    out.timed("write", |o| {
        let rows = results.iter().map(|(name, cfg, m)| MetricsRow {
            label: name,
            pipeline: cfg.kind.name(),
            channels: cfg.channels,
            metrics: m,
        });
        Ok(export::write_metrics_csv(o.create("metrics.csv")?, rows)?)
    })
}

/// Rebuilds the detection maps of a finished run from its `spec.json` and
/// writes them as PGM images and CSV tables under `maps/`. Returns the
/// number of frames written per pipeline.
pub fn export_maps(run_dir: &Path) -> Result<usize> {
    let spec = parse_runspec(&run_dir.join("spec.json"))?;
    let scene = spec.scene()?;
    let pipes = spec.pipeline_specs();
    let nested = pipes.len() > 1;
    let n = scene.n_frames(&spec.radar);
    for p in &pipes {
        let cfg = p.resolve(&spec.radar)?;
        let pre = Preprocessor::new(&spec.radar, &cfg.dsp)?;
        let dir = if nested { run_dir.join(p.label(&spec.radar)).join("maps") } else { run_dir.join("maps") };
        fs::create_dir_all(&dir)?;
        for f in 0..n {
            let frame = synthesize_frame(&scene, &spec.radar, f)?;
            let rd = pre.range_doppler(&frame);
            let map = match cfg.kind {
                PipelineKind::Ra => pre.make_ra_map(&rd, cfg.channels, f)?,
                PipelineKind::Rd => pre.make_rd_map(&rd, cfg.channels, f)?,
            };
            fs::write(dir.join(format!("frame_{f:04}.pgm")), export::map_to_pgm(&map))?;
            export::write_map_csv(BufWriter::new(fs::File::create(dir.join(format!("frame_{f:04}.csv")))?), &map)?;
        }
    }
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunSpec> {
        RunSpec::from_json(text, Path::new("test.json"))
    }

    #[test]
    fn minimal_spec_gets_table_defaults() {
        let s = parse(r#"{"scene": {"builtin": "1T_AB"}, "experiment": "single-run"}"#).unwrap();
        assert_eq!(s.radar.carrier_freq_hz, 24e9);
        assert_eq!(s.radar.bandwidth_hz, 250e6);
        assert_eq!(s.radar.chirps_per_frame, 90);
        assert_eq!(s.radar.n_virtual_channels, 15);
        assert_eq!(s.experiment, ExperimentKind::SingleRun);
        assert_eq!(s.pipeline_specs().len(), 1);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = parse("{\"scene\": {\"builtin\": \"1T_AB\"},\n \"experiment\": \"single-run\",\n \"radar\": {\"bandwith\": 1e6}}")
            .unwrap_err()
            .to_string();
        assert!(err.contains("bandwith"), "{err}");
        assert!(err.contains("line 3"), "{err}");
        assert!(err.contains("radar"), "{err}");
    }

    #[test]
    fn round_trip_is_identity() {
        let mut s = RunSpec::new(SceneSpec::Builtin("2T_parallel_0p6m".into()), ExperimentKind::Ablation);
        s.pipelines = vec![PipelineSpec::new(PipelineKind::Rd)];
        s.seed = 9;
        let back = parse(&s.to_json()).unwrap();
        assert_eq!(back, s);
        assert_eq!(parse(&back.to_json()).unwrap().to_json(), s.to_json());
    }

    #[test]
    fn semantic_errors_are_reported() {
        assert!(parse(r#"{"experiment": "single-run"}"#).is_err());
        assert!(parse(r#"{"scene": {"builtin": "nope"}, "experiment": "single-run"}"#).is_err());
        assert!(parse(r#"{"scene": {"builtin": "1T_AB"}, "experiment": "single-run", "pipelines": [{"channels": 16}]}"#).is_err());
        assert!(parse(r#"{"scene": {"builtin": "1T_AB"}, "experiment": "sideways"}"#).is_err());
    }

    #[test]
    fn custom_scene_takes_the_run_seed() {
        let text = r#"{"scene": {"custom": {"duration_s": 1.0, "seed": 3,
            "humans": [{"waypoints": [{"x": 0.0, "y": 2.0, "t": 0.0}, {"x": 0.0, "y": 3.0, "t": 1.0}], "torso_rcs": 0.05}]}},
            "experiment": "single-run", "seed": 11}"#;
        let s = parse(text).unwrap();
        assert_eq!(s.scene().unwrap().seed, 11);
    }
}
