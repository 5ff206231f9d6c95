//! Stage orchestration for the command-line tool.
//!
//! Every stage reads what it needs from the output directory and writes its
//! artifacts back there, so any stage can be rerun on its own. A stage is
//! skipped when its cache key (config slice, input mesh, upstream artifact
//! hashes) matches the last run and its outputs are untouched.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use quartic::forms::{
    combined_form, holomorphic_basis, locate_zeros, normalize_basis, DiscreteOneForm, FormContext, HarmonicBasis,
    HolomorphicBasis, HolomorphicOneForm,
};
use quartic::homology::{compute_cut_graph, homology_basis, HomologyBasis, TreeCotree};
use quartic::immersion::{augment_cut_graph, checkerboard_obj, flatten, Immersion};
use quartic::jacobi::{build_lattice, period_matrix, AbelJacobiImage, AbelJacobiMap, Divisor, JacobianLattice, PeriodMatrix};
use quartic::mesh::save_obj;
use quartic::mesh::{insert_points, CurveGraph, SurfaceMesh, SurfacePoint};
use quartic::optimize::{initialize_divisor, optimize_divisor, trace_csv, Objective, OptimizeConfig};
use quartic::ricci::{
    circular_distance, flow_to_metric, holonomy, pushoff_holonomy, target_curvature, vertex_link_crossings, ConeMetric,
    RicciConfig,
};
use quartic::tmesh::{extract_patches, motor_graph, NodeKind, TMesh, TraceConfig, Tracer};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Homology,
    Oneforms,
    Periods,
    Optimize,
    Ricci,
    Immerse,
    Tmesh,
}

impl Stage {
    pub const ALL: [Stage; 7] =
        [Stage::Homology, Stage::Oneforms, Stage::Periods, Stage::Optimize, Stage::Ricci, Stage::Immerse, Stage::Tmesh];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Homology => "homology",
            Stage::Oneforms => "oneforms",
            Stage::Periods => "periods",
            Stage::Optimize => "optimize",
            Stage::Ricci => "ricci",
            Stage::Immerse => "immerse",
            Stage::Tmesh => "tmesh",
        }
    }

    pub fn outputs(self) -> &'static [&'static str] {
        match self {
            Stage::Homology => &["homology.json"],
            Stage::Oneforms => &["oneforms.json"],
            Stage::Periods => &["periods.json"],
            Stage::Optimize => &["divisor.json", "optimize_trace.csv"],
            Stage::Ricci => &["refined.obj", "metric.json", "cone_metric.json", "holonomy.csv"],
            Stage::Immerse => &["immersion.json", "transitions.json", "immersion.obj"],
            Stage::Tmesh => &["tmesh.json", "tmesh_preview.obj"],
        }
    }

    fn upstream(self) -> Option<Stage> {
        let i = Stage::ALL.iter().position(|&s| s == self).unwrap();
        i.checked_sub(1).map(|j| Stage::ALL[j])
    }

    fn summary_file(self) -> String {
        format!("summary_{}.json", self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub input: PathBuf,
    pub out: PathBuf,
    /// Abel-Jacobi threshold on `‖μ‖²`.
    pub epsilon: f64,
    /// Per-component residual bound.
    pub component_tol: f64,
    pub ricci_tol: f64,
    pub optimize_max_iters: usize,
    pub ricci_max_iters: usize,
    pub seed: u64,
    /// Real coefficients of the quartic's square-root form over the
    /// holomorphic generators; all ones when empty.
    pub coefficients: Vec<f64>,
    pub stages: Vec<Stage>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            input: PathBuf::new(),
            out: PathBuf::from("out"),
            epsilon: 3.0e-4,
            component_tol: 1e-3,
            ricci_tol: 1e-8,
            optimize_max_iters: 100_000,
            ricci_max_iters: 500,
            seed: 11,
            coefficients: Vec::new(),
            stages: Stage::ALL.to_vec(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).context("parsing config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.component_tol > 0.0 && self.ricci_tol > 0.0) {
            bail!("thresholds must be positive");
        }
        if self.optimize_max_iters == 0 || self.ricci_max_iters == 0 {
            bail!("iteration caps must be positive");
        }
        Ok(())
    }

    /// The part of the config a stage depends on.
    fn slice(&self, stage: Stage) -> Value {
        match stage {
            Stage::Homology | Stage::Periods | Stage::Immerse | Stage::Tmesh => json!({}),
            Stage::Oneforms => json!({ "seed": self.seed }),
            Stage::Optimize => json!({
                "epsilon": self.epsilon,
                "component_tol": self.component_tol,
                "max_iters": self.optimize_max_iters,
                "coefficients": self.coefficients,
            }),
            Stage::Ricci => json!({ "tol": self.ricci_tol, "max_iters": self.ricci_max_iters }),
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("stage {stage} failed (artifacts in {})", artifacts.display())]
pub struct StageError {
    pub stage: &'static str,
    pub artifacts: PathBuf,
    pub source: anyhow::Error,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
    pub cached: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub mesh: Value,
    pub stages: Vec<StageTiming>,
    /// Per-stage numbers, as persisted next to the artifacts.
    pub summaries: BTreeMap<String, Value>,
    pub error: Option<String>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    let d = Sha256::digest(bytes);
    d.iter().map(|b| format!("{b:02x}")).collect()
}

fn write(dir: &Path, name: &str, data: impl AsRef<[u8]>) -> Result<()> {
    fs::write(dir.join(name), data).with_context(|| format!("writing {name}"))
}

fn write_json(dir: &Path, name: &str, v: &impl Serialize) -> Result<()> {
    write(dir, name, serde_json::to_string_pretty(v)?)
}

fn read_json<T: for<'de> Deserialize<'de>>(dir: &Path, name: &str) -> Result<T> {
    let text = fs::read_to_string(dir.join(name)).with_context(|| format!("missing artifact {name}"))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {name}"))
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
struct CacheEntry {
    key: String,
    outputs: BTreeMap<String, String>,
}

type Cache = BTreeMap<String, CacheEntry>;

#[derive(Serialize, Deserialize)]
struct HomologyArtifact {
    base: usize,
    loops: CurveGraph,
}

#[derive(Serialize, Deserialize)]
struct FormsArtifact {
    seed: u64,
    harmonic: Vec<DiscreteOneForm>,
    generators: Vec<HolomorphicOneForm>,
    forms: Vec<HolomorphicOneForm>,
}

#[derive(Serialize, Deserialize)]
struct PeriodsArtifact {
    period_matrix: PeriodMatrix,
    lattice: JacobianLattice,
    identity_deviation: f64,
}

#[derive(Serialize, Deserialize)]
pub struct DivisorArtifact {
    pub divisor: Divisor,
    pub reference: Divisor,
    pub image: AbelJacobiImage,
    pub iterations: usize,
}

/// Shared state of one run: the input mesh and the output directory.
pub struct Pipeline {
    pub cfg: PipelineConfig,
    mesh: SurfaceMesh,
    mesh_hash: String,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig) -> Result<Self> {
        cfg.validate()?;
        let bytes = fs::read(&cfg.input).with_context(|| format!("reading {}", cfg.input.display()))?;
        let mesh = SurfaceMesh::load(&cfg.input).with_context(|| format!("loading {}", cfg.input.display()))?;
        fs::create_dir_all(&cfg.out)?;
        Ok(Pipeline { mesh_hash: sha256_hex(&bytes), mesh, cfg })
    }

    fn dir(&self) -> &Path {
        &self.cfg.out
    }

    fn mesh_stats(&self) -> Value {
        let m = &self.mesh;
        json!({
            "vertices": m.n_vertices(),
            "edges": m.n_edges(),
            "faces": m.n_faces(),
            "genus": m.genus(),
        })
    }

    fn stage_key(&self, stage: Stage) -> Result<String> {
        let mut h = Sha256::new();
        h.update(stage.name());
        h.update(self.mesh_hash.as_bytes());
        h.update(serde_json::to_string(&self.cfg.slice(stage))?);
        let mut up = stage.upstream();
        while let Some(s) = up {
            for f in s.outputs() {
                let bytes = fs::read(self.dir().join(f)).with_context(|| format!("missing upstream artifact {f}"))?;
                h.update(f.as_bytes());
                h.update(Sha256::digest(&bytes));
            }
            up = s.upstream();
        }
        Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
    }

    fn load_cache(&self) -> Cache {
        fs::read_to_string(self.dir().join("cache.json"))
            .ok()
            .and_then(|t| serde_json::from_str(&t).ok())
            .unwrap_or_default()
    }

    fn output_hashes(&self, stage: Stage) -> Result<BTreeMap<String, String>> {
        let mut out = BTreeMap::new();
        for f in stage.outputs().iter().map(|s| s.to_string()).chain([stage.summary_file()]) {
            let bytes = fs::read(self.dir().join(&f)).with_context(|| format!("missing artifact {f}"))?;
            out.insert(f, sha256_hex(&bytes));
        }
        Ok(out)
    }

    /// Run the configured stages in order, writing `report.json`.
    pub fn run(&self) -> std::result::Result<RunReport, StageError> {
        let mut report =
            RunReport { mesh: self.mesh_stats(), stages: Vec::new(), summaries: BTreeMap::new(), error: None };
        let _ = write(self.dir(), "config.toml", toml::to_string(&self.cfg).unwrap_or_default());
        let mut stages = self.cfg.stages.clone();
        stages.sort();
        stages.dedup();
        for stage in stages {
            let started = Instant::now();
            let res = self.run_stage(stage);
            let seconds = started.elapsed().as_secs_f64();
            match res {
                Ok((summary, cached)) => {
                    report.stages.push(StageTiming { stage: stage.name().into(), seconds, cached });
                    report.summaries.insert(stage.name().into(), summary);
                }
                Err(source) => {
                    report.error = Some(format!("{}: {source:#}", stage.name()));
                    report.stages.push(StageTiming { stage: stage.name().into(), seconds, cached: false });
                    let _ = write_json(self.dir(), "report.json", &report);
                    return Err(StageError { stage: stage.name(), artifacts: self.dir().to_path_buf(), source });
                }
            }
        }
        let _ = write_json(self.dir(), "report.json", &report);
        Ok(report)
    }

    pub fn run_stage(&self, stage: Stage) -> Result<(Value, bool)> {
        let key = self.stage_key(stage)?;
        let mut cache = self.load_cache();
        if let Some(entry) = cache.get(stage.name()) {
            if entry.key == key && self.output_hashes(stage).ok().as_ref() == Some(&entry.outputs) {
                log::info!("{}: cached", stage.name());
                return Ok((read_json(self.dir(), &stage.summary_file())?, true));
            }
        }
        log::info!("{}: running", stage.name());
        let summary = match stage {
            Stage::Homology => self.homology()?,
            Stage::Oneforms => self.oneforms()?,
            Stage::Periods => self.periods()?,
            Stage::Optimize => self.optimize()?,
            Stage::Ricci => self.ricci()?,
            Stage::Immerse => self.immerse()?,
            Stage::Tmesh => self.tmesh()?,
        };
        write_json(self.dir(), &stage.summary_file(), &summary)?;
        // Downstream keys hash these outputs, so unchanged bytes keep them valid.
        cache.insert(stage.name().into(), CacheEntry { key, outputs: self.output_hashes(stage)? });
        write_json(self.dir(), "cache.json", &cache)?;
        Ok((summary, false))
    }

    fn basis(&self) -> Result<HomologyBasis> {
        let a: HomologyArtifact = read_json(self.dir(), "homology.json")?;
        let mut b = HomologyBasis::from_curve_graph(self.mesh.topology(), &a.loops)?;
        b.base = a.base;
        Ok(b)
    }

    fn holomorphic(&self) -> Result<HolomorphicBasis> {
        let f: FormsArtifact = read_json(self.dir(), "oneforms.json")?;
        Ok(HolomorphicBasis { generators: f.generators, forms: f.forms, normalized: true })
    }

    fn homology(&self) -> Result<Value> {
        let topo = self.mesh.topology();
        if self.mesh.genus() == 0 {
            bail!("genus-0 input has no holomorphic 1-forms");
        }
        let basis = homology_basis(topo)?;
        basis.verify(topo)?;
        write_json(self.dir(), "homology.json", &HomologyArtifact { base: basis.base, loops: basis.to_curve_graph() })?;
        Ok(json!({ "genus": basis.genus(), "loop_lengths": basis.loops().iter().map(Vec::len).collect::<Vec<_>>() }))
    }

    fn oneforms(&self) -> Result<Value> {
        let topo = self.mesh.topology();
        let lengths = self.mesh.edge_lengths();
        let basis = self.basis()?;
        let ctx = FormContext::new(topo, &lengths, 1e-12)?;
        let hb = HarmonicBasis::new(&ctx, &basis, self.cfg.seed)?;
        let raw = holomorphic_basis(&hb, &basis)?;
        let nb = normalize_basis(&raw, &basis)?;
        let closed = hb.forms.iter().map(DiscreteOneForm::closedness_residual).fold(0.0, f64::max);
        write_json(
            self.dir(),
            "oneforms.json",
            &FormsArtifact { seed: self.cfg.seed, harmonic: hb.forms.clone(), generators: nb.generators, forms: nb.forms },
        )?;
        Ok(json!({ "forms": hb.forms.len(), "closedness_residual": closed }))
    }

    fn periods(&self) -> Result<Value> {
        let basis = self.basis()?;
        let nb = self.holomorphic()?;
        let pm = period_matrix(&nb, &basis)?;
        let lattice = build_lattice(&pm)?;
        let dev = pm.identity_deviation();
        write_json(self.dir(), "periods.json", &PeriodsArtifact { period_matrix: pm, lattice, identity_deviation: dev })?;
        Ok(json!({ "a_period_identity_deviation": dev }))
    }

    fn ajmap<'a>(&self, ctx: &FormContext<'a>, nb: &HolomorphicBasis) -> Result<AbelJacobiMap> {
        let p: PeriodsArtifact = read_json(self.dir(), "periods.json")?;
        let cut = TreeCotree::new(self.mesh.topology(), 0).cut_mask(self.mesh.topology());
        Ok(AbelJacobiMap::new(ctx, nb, &cut, &p.lattice)?)
    }

    fn optimize(&self) -> Result<Value> {
        let topo = self.mesh.topology();
        let lengths = self.mesh.edge_lengths();
        let ctx = FormContext::new(topo, &lengths, 1e-12)?;
        let nb = self.holomorphic()?;
        let map = self.ajmap(&ctx, &nb)?;
        let coeffs =
            if self.cfg.coefficients.is_empty() { vec![1.0; nb.generators.len()] } else { self.cfg.coefficients.clone() };
        let phi = combined_form(&nb, &coeffs)?;
        let reference = locate_zeros(&ctx, &phi, &nb.forms)?.scaled(4);
        let d0 = initialize_divisor(topo, &lengths, None)?;
        let g = map.genus();
        let art = if d0.is_empty() {
            let zero = vec![Complex64::new(0.0, 0.0); g];
            let image = AbelJacobiImage { phi: zero.clone(), s: vec![0; g], t: vec![0; g], residual: zero };
            write(self.dir(), "optimize_trace.csv", trace_csv(&[]))?;
            DivisorArtifact { divisor: d0, reference, image, iterations: 0 }
        } else {
            let obj = Objective::new(topo, &lengths, &map, &reference);
            let cfg = OptimizeConfig {
                epsilon: self.cfg.epsilon,
                component_tol: self.cfg.component_tol,
                max_iters: self.cfg.optimize_max_iters,
                ..OptimizeConfig::default()
            };
            let res = optimize_divisor(&obj, &d0, &reference, &cfg)?;
            write(self.dir(), "optimize_trace.csv", trace_csv(&res.trace))?;
            DivisorArtifact { divisor: res.divisor, reference, image: res.image, iterations: res.iterations }
        };
        write_json(self.dir(), "divisor.json", &art)?;
        Ok(json!({
            "points": art.divisor.len(),
            "iterations": art.iterations,
            "residual_norm_sqr": art.image.residual_norm_sqr(),
            "residual": art.image.residual.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
        }))
    }

    fn ricci(&self) -> Result<Value> {
        let d: DivisorArtifact = read_json(self.dir(), "divisor.json")?;
        let points: Vec<SurfacePoint> = d.divisor.terms.iter().map(|t| t.point).collect();
        let refined = insert_points(&self.mesh, &points, 1e-6, 1e-3)?;
        let rt = refined.mesh.topology();
        let target = target_curvature(rt, &refined.point_vertex, &d.divisor)?;
        let cfg = RicciConfig { tol: self.cfg.ricci_tol, max_iters: self.cfg.ricci_max_iters, ..RicciConfig::default() };
        let metric = flow_to_metric(rt, &refined.mesh.edge_lengths(), &target, &cfg)?;
        save_obj(&refined.mesh, self.dir().join("refined.obj"))?;
        write_json(self.dir(), "metric.json", &metric.to_file()?)?;
        write_json(self.dir(), "cone_metric.json", &metric)?;
        let table = holonomy_table(&metric)?;
        let mut csv = String::from("loop,degrees\n");
        for (tag, deg, _) in &table {
            csv.push_str(&format!("{tag},{deg:.6}\n"));
        }
        write(self.dir(), "holonomy.csv", csv)?;
        Ok(json!({
            "iterations": metric.iterations,
            "epochs": metric.epochs,
            "flips": metric.flips.len(),
            "max_curvature_error": metric.max_error()?,
            "gauss_bonnet_drift": metric.gauss_bonnet_drift,
            "max_point_displacement": refined.displacement.iter().copied().fold(0.0, f64::max),
            "holonomy": table.iter().map(|(t, d, e)| json!({"loop": t, "degrees": d, "deviation": e})).collect::<Vec<_>>(),
        }))
    }

    fn metric(&self) -> Result<ConeMetric> {
        read_json(self.dir(), "cone_metric.json")
    }

    fn refined(&self) -> Result<SurfaceMesh> {
        Ok(SurfaceMesh::load(self.dir().join("refined.obj"))?)
    }

    fn immerse(&self) -> Result<Value> {
        let metric = self.metric()?;
        let topo = &metric.topo;
        let lengths = metric.lengths();
        let cones = cone_vertices(&metric);
        let cut = compute_cut_graph(topo);
        let aug = augment_cut_graph(topo, &lengths, &cut, &cones)?;
        let imm = flatten(topo, &lengths, &aug.edge_mask(topo), &cones, 0)?;
        let refined = self.refined()?;
        write_json(self.dir(), "immersion.json", &imm)?;
        write_json(self.dir(), "transitions.json", &imm.transitions_json(topo))?;
        write(self.dir(), "immersion.obj", checkerboard_obj(topo, refined.positions(), &imm, 1.0)?)?;
        Ok(json!({
            "max_length_error": imm.max_length_error(topo, &lengths),
            "max_quantization_error_degrees": imm.max_quantization_error(topo),
            "foldovers": imm.foldovers,
            "cut_edges": aug.edge_mask(topo).iter().filter(|c| **c).count(),
        }))
    }

    fn tmesh(&self) -> Result<Value> {
        let metric = self.metric()?;
        let topo = &metric.topo;
        let imm: Immersion = read_json(self.dir(), "immersion.json")?;
        let cones = cone_vertices(&metric);
        if cones.is_empty() {
            // No singularities: nothing to trace, the whole surface is one
            // flat torus chart.
            write(self.dir(), "tmesh.json", "{\"schema\":\"tmesh-v1\",\"skipped\":\"no singularities\"}\n")?;
            write(self.dir(), "tmesh_preview.obj", "")?;
            return Ok(json!({ "skipped": "no singularities" }));
        }
        let lengths = metric.lengths();
        let mut tracer = Tracer::new(topo, &imm, &cones, TraceConfig::for_surface(topo, &lengths));
        let rays = tracer.emit_separatrices(&cones)?;
        let trajs = rays.iter().map(|r| tracer.trace(r)).collect::<Result<Vec<_>, _>>()?;
        let mg = motor_graph(&tracer, trajs);
        let capped = mg.capped();
        if capped > 0 {
            log::warn!("{capped} trajectories hit the length cap");
        }
        let tm = extract_patches(&mg, topo, &imm)?;
        let refined = self.refined()?;
        tm.write(self.dir(), topo, refined.positions())?;
        Ok(tmesh_summary(&tm, &imm, topo, capped, mg.ties))
    }
}

fn tmesh_summary(tm: &TMesh, imm: &Immersion, topo: &quartic::mesh::Topology, capped: usize, ties: usize) -> Value {
    let surface = surface_area(imm, topo);
    json!({
        "patches": tm.patches.len(),
        "t_junctions": tm.junctions.len(),
        "x_crossings": tm.xings.len(),
        "capped_trajectories": capped,
        "ties": ties,
        "max_corner_error": tm.max_corner_error(),
        "area_relative_error": (tm.total_area() - surface).abs() / surface,
        "rectangle_area_relative_error": (tm.rect_area() - surface).abs() / surface,
    })
}

fn surface_area(imm: &Immersion, topo: &quartic::mesh::Topology) -> f64 {
    (0..topo.n_faces())
        .map(|f| {
            let z = imm.face(f);
            0.5 * ((z[1] - z[0]).conj() * (z[2] - z[0])).im
        })
        .sum()
}

pub fn cone_vertices(metric: &ConeMetric) -> Vec<usize> {
    (0..metric.target.len()).filter(|&v| metric.target[v].abs() > 1e-12).collect()
}

/// Basis-loop and cone-link holonomies with their distance to the expected
/// value (nearest quarter turn for basis loops, cone angle for links).
pub fn holonomy_table(metric: &ConeMetric) -> Result<Vec<(String, f64, f64)>> {
    let mut out = Vec::new();
    let basis = homology_basis(&metric.initial)?;
    for (tag, lp) in basis.tags().into_iter().zip(basis.loops()) {
        let deg = pushoff_holonomy(metric, &lp)?;
        let q = (deg / 90.0).round() * 90.0;
        out.push((tag, deg, circular_distance(deg, q)));
    }
    for v in cone_vertices(metric) {
        let deg = holonomy(metric, &vertex_link_crossings(&metric.topo, v))?;
        let expected = (2.0 * std::f64::consts::PI - metric.target[v]).to_degrees();
        out.push((format!("cone{v}"), deg, circular_distance(deg, expected)));
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn check(name: impl Into<String>, value: f64, tolerance: f64) -> Check {
    Check { name: name.into(), value, tolerance, pass: value <= tolerance }
}

/// Recompute the headline numbers from persisted artifacts.
pub fn verify(cfg: &PipelineConfig) -> Result<Vec<Check>> {
    let p = Pipeline::new(cfg.clone())?;
    let dir = p.dir();
    let mut checks = Vec::new();

    // Abel-Jacobi residual of the stored divisor.
    let topo = p.mesh.topology();
    let lengths = p.mesh.edge_lengths();
    let ctx = FormContext::new(topo, &lengths, 1e-12)?;
    let nb = p.holomorphic()?;
    let map = p.ajmap(&ctx, &nb)?;
    let d: DivisorArtifact = read_json(dir, "divisor.json")?;
    if !d.divisor.is_empty() {
        let obj = Objective::new(topo, &lengths, &map, &d.reference);
        let coords: Vec<i64> = d.image.s.iter().chain(&d.image.t).copied().collect();
        let r = obj.residual(&d.divisor, &coords);
        let e: f64 = r.iter().map(|z| z.norm_sqr()).sum();
        checks.push(check("abel_jacobi_residual_sqr", e, cfg.epsilon));
        checks.push(check("abel_jacobi_max_component", r.iter().map(|z| z.norm()).fold(0.0, f64::max), cfg.component_tol));
    }

    let metric = p.metric()?;
    let k = metric.curvature()?;
    let chi = metric.topo.euler_characteristic() as f64;
    checks.push(check("gauss_bonnet", (k.iter().sum::<f64>() - 2.0 * std::f64::consts::PI * chi).abs(), 1e-9));
    checks.push(check("max_curvature_error", metric.max_error()?, cfg.ricci_tol));
    let table = holonomy_table(&metric)?;
    checks.push(check("max_holonomy_deviation_degrees", table.iter().map(|r| r.2).fold(0.0, f64::max), 0.5));

    let imm: Immersion = read_json(dir, "immersion.json")?;
    let ml = metric.lengths();
    checks.push(check("immersion_length_error", imm.max_length_error(&metric.topo, &ml), 1e-9));
    checks.push(check("transition_quantization_degrees", imm.max_quantization_error(&metric.topo), 0.5));

    let text = fs::read_to_string(dir.join("tmesh.json")).context("missing artifact tmesh.json")?;
    if !text.contains("\"skipped\"") {
        let tm = TMesh::from_json(&text)?;
        let surface = surface_area(&imm, &metric.topo);
        checks.push(check("tmesh_corner_error", tm.max_corner_error(), 1e-6));
        checks.push(check("tmesh_area_relative_error", (tm.total_area() - surface).abs() / surface, 1e-6));
        let val = tm.valences();
        let bad = tm
            .nodes
            .iter()
            .zip(&val)
            .filter(|(k, &n)| matches!(k, NodeKind::TJunction(_)) && n != 3)
            .count();
        checks.push(check("tmesh_bad_t_junctions", bad as f64, 0.0));
    }
    write_json(dir, "verify.json", &checks)?;
    Ok(checks)
}

/// Files whose bytes must not depend on anything but config and input.
pub fn deterministic_artifacts() -> Vec<&'static str> {
    Stage::ALL.iter().flat_map(|s| s.outputs().iter().copied()).collect()
}

pub fn missing(dir: &Path, names: &[&str]) -> Result<()> {
    for n in names {
        if !dir.join(n).exists() {
            return Err(anyhow!("missing artifact {n}"));
        }
    }
    Ok(())
}
