//! Pipeline stages. Each stage writes its files into the output directory
//! and records its outputs and metrics in the manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use causticwave::arc1d::qhje::qhje_residuals;
use causticwave::arc1d::{search_eigenstate, Eigenstate, Method};
use causticwave::caustic::{harvest_caustic, orient_caustic, Caustic, ARC_NAMES};
use causticwave::dynamics::{detect_caustic_points, integrate_jacobi, integrate_trajectory};
use causticwave::field2d::classical::CharacteristicOptions;
use causticwave::field2d::diagnostics::{
    point_in_polygon, radial_growth, sign_changes_along, turning_surface,
};
use causticwave::field2d::mesh::{mesh_exterior_on, mesh_interior_on};
use causticwave::field2d::qhje::oriented_arcs;
use causticwave::field2d::{
    bounding_box, outer_box, parity_defect, qhje_wavefunction, solve_classical_action,
    solve_dirichlet_se, solve_qhje_field, weld, wkb_field, wkb_partial, CausticRing, FieldSolution,
    Mesh,
};
use causticwave::io::{csv, write_text};
use causticwave::oracle::{compare_fields, diagonalize, oracle_wavefunction, Spectrum};
use causticwave::{Model, Point2};
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{CliError, StageError};
use crate::manifest::{Manifest, StageRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Trace,
    Caustic,
    Arcs,
    Eigensearch,
    Field,
    Oracle,
    Compare,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Trace => "trace",
            Stage::Caustic => "caustic",
            Stage::Arcs => "arcs",
            Stage::Eigensearch => "eigensearch",
            Stage::Field => "field",
            Stage::Oracle => "oracle",
            Stage::Compare => "compare",
        }
    }
}

/// Cached eigen-search result with the hash of its inputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct CachedEigenstate {
    hash: String,
    eigenstate: Eigenstate,
}

/// Fields produced by the `field` stage for the configured method.
#[derive(Debug, Clone)]
pub struct FieldProducts {
    pub method: Method,
    pub caustic: Caustic,
    /// Full (symmetrized) field inside the caustic.
    pub interior: FieldSolution,
    /// Interior and exterior welded, SE only.
    pub welded: Option<FieldSolution>,
}

pub struct Run {
    pub config: PipelineConfig,
    pub out: PathBuf,
    pub resume: bool,
    pub manifest: Manifest,
    model: Model,
    eigenstate: Option<Eigenstate>,
    spectrum: Option<Spectrum>,
    fields: Option<FieldProducts>,
}

type StageResult<T> = Result<T, StageError>;

impl Run {
    pub fn new(config: PipelineConfig, resume: bool) -> Result<Self, CliError> {
        config.validate()?;
        causticwave::numeric::sequential_linear_algebra();
        let model = config
            .model()
            .map_err(|e| CliError::Config(e.to_string()))?;
        let out = config.output.dir.clone();
        std::fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
        let manifest = Manifest::load_or_new(&out, &config);
        Ok(Self {
            config,
            out,
            resume,
            manifest,
            model,
            eigenstate: None,
            spectrum: None,
            fields: None,
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    fn method(&self) -> Method {
        self.config.search.method
    }

    fn key(&self, stage: Stage) -> String {
        match stage {
            Stage::Trace | Stage::Caustic | Stage::Oracle => stage.name().to_string(),
            _ => format!("{}:{}", stage.name(), self.method()),
        }
    }

    fn stage_hash(&self, stage: Stage) -> String {
        let c = &self.config;
        let parts: Vec<String> = match stage {
            Stage::Eigensearch | Stage::Arcs => vec![c.search_hash()],
            Stage::Trace | Stage::Caustic => vec![
                c.search_hash(),
                format!("{:?}", c.trace),
                self.eigenstate_on_disk()
                    .map(|e| format!("{:?}", e.vertex))
                    .unwrap_or_default(),
            ],
            Stage::Field => vec![
                c.search_hash(),
                format!("{:?}{:?}", c.field, c.search.parity),
            ],
            Stage::Oracle => vec![
                format!("{:?}{:?}", c.model, c.oracle),
                format!("{:?}", c.search.state),
            ],
            Stage::Compare => vec![
                self.stage_hash(Stage::Field),
                self.stage_hash(Stage::Oracle),
            ],
        };
        short_hash(&parts.join("|"))
    }

    /// True when `--resume` is set and the stage's recorded outputs are
    /// present and were produced from the same inputs.
    fn up_to_date(&self, stage: Stage) -> bool {
        if !self.resume {
            return false;
        }
        match self.manifest.stages.get(&self.key(stage)) {
            Some(r) => {
                r.hash == self.stage_hash(stage)
                    && r.outputs.iter().all(|f| self.out.join(f).exists())
            }
            None => false,
        }
    }

    fn record(&mut self, stage: Stage, rec: StageRecord) -> Result<(), CliError> {
        self.manifest.stages.insert(self.key(stage), rec);
        self.manifest.write(&self.out)
    }

    fn write(&self, rec: &mut StageRecord, name: &str, text: &str) -> Result<(), CliError> {
        let path = self.out.join(name);
        write_text(&path, text).map_err(|e| CliError::io(&path, e))?;
        rec.outputs.push(name.to_string());
        Ok(())
    }

    fn write_json<T: Serialize>(
        &self,
        rec: &mut StageRecord,
        name: &str,
        value: &T,
    ) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Json {
            path: name.to_string(),
            source: e,
        })?;
        self.write(rec, name, &(text + "\n"))
    }

    pub fn run(&mut self, stage: Stage) -> Result<(), CliError> {
        if self.up_to_date(stage) {
            eprintln!("[{}] up to date, skipped", stage.name());
            return Ok(());
        }
        eprintln!("[{}] running", stage.name());
        match stage {
            Stage::Eigensearch => self.eigensearch_stage(),
            Stage::Trace => self.trace_stage(),
            Stage::Caustic => self.caustic_stage(),
            Stage::Arcs => self.arcs_stage(),
            Stage::Field => self.field_stage(),
            Stage::Oracle => self.oracle_stage(),
            Stage::Compare => self.compare_stage(),
        }
    }

    pub fn pipeline(&mut self) -> Result<(), CliError> {
        for stage in [
            Stage::Eigensearch,
            Stage::Trace,
            Stage::Caustic,
            Stage::Arcs,
            Stage::Field,
            Stage::Oracle,
            Stage::Compare,
        ] {
            self.run(stage)?;
        }
        Ok(())
    }

    fn eigenstate_path(&self) -> PathBuf {
        self.out.join(format!("eigenstate_{}.json", self.method()))
    }

    fn eigenstate_on_disk(&self) -> Option<Eigenstate> {
        let text = std::fs::read_to_string(self.eigenstate_path()).ok()?;
        let cached: CachedEigenstate = serde_json::from_str(&text).ok()?;
        if cached.hash != self.config.search_hash() {
            return None;
        }
        let mut e = cached.eigenstate;
        e.caustic.prepare();
        Some(e)
    }

    /// Converged eigenstate from memory, the hash-checked cache, or a new
    /// search.
    pub fn eigenstate(&mut self) -> Result<Eigenstate, CliError> {
        if let Some(e) = &self.eigenstate {
            return Ok(e.clone());
        }
        if let Some(e) = self.eigenstate_on_disk() {
            eprintln!("[eigensearch] reusing {}", self.eigenstate_path().display());
            self.eigenstate = Some(e.clone());
            return Ok(e);
        }
        self.eigensearch_stage()?;
        Ok(self.eigenstate.clone().expect("set by the search"))
    }

    fn eigensearch_stage(&mut self) -> Result<(), CliError> {
        let opts = self.config.search_options(&self.model);
        let e =
            search_eigenstate(&self.model, &opts).map_err(|e| CliError::stage("eigensearch", e))?;
        eprintln!(
            "[eigensearch] E = {} at vertex ({}, {})",
            e.energy, e.vertex.x, e.vertex.y
        );
        let mut rec = StageRecord::new(self.stage_hash(Stage::Eigensearch));
        let cached = CachedEigenstate {
            hash: self.config.search_hash(),
            eigenstate: e.clone(),
        };
        let name = format!("eigenstate_{}.json", self.method());
        self.write_json(&mut rec, &name, &cached)?;
        rec.metric("energy", e.energy);
        rec.metric("vertex_x", e.vertex.x);
        rec.metric("vertex_y", e.vertex.y);
        rec.metric("theta_deg", e.theta.to_degrees());
        rec.metric("max_regularity", e.max_regularity);
        rec.metric("opposite_mismatch", e.opposite_mismatch);
        rec.metric("evaluations", e.evaluations as f64);
        for (k, c) in e.counts.iter().enumerate() {
            rec.metric(&format!("count_{}", ARC_NAMES[k]), *c);
        }
        self.eigenstate = Some(e);
        self.record(Stage::Eigensearch, rec)
    }

    /// Start point for `trace` and `caustic`: the converged vertex when
    /// cached, else the configured one.
    fn trace_vertex(&self) -> Point2 {
        match self
            .eigenstate
            .clone()
            .or_else(|| self.eigenstate_on_disk())
        {
            Some(e) => e.vertex,
            None => Point2::new(self.config.trace.vertex[0], self.config.trace.vertex[1]),
        }
    }

    fn trace_stage(&mut self) -> Result<(), CliError> {
        let err = |e: causticwave::dynamics::DynamicsError| CliError::stage("trace", e);
        let v = self.trace_vertex();
        let m = self.model;
        let traj = integrate_trajectory(
            &m,
            v,
            Point2::ORIGIN,
            self.config.trace.duration,
            self.config.dt(&m),
        )
        .map_err(err)?;
        let jac = integrate_jacobi(&traj).map_err(err)?;
        let points = detect_caustic_points(&traj, &jac);
        let mut rec = StageRecord::new(self.stage_hash(Stage::Trace));
        let rows = traj
            .samples
            .iter()
            .step_by(self.config.trace.stride)
            .map(|s| {
                let (q, p) = (s.state.q, s.state.p);
                vec![s.t, q.x, q.y, p.x, p.y]
            });
        self.write(
            &mut rec,
            "fig1_trajectories.csv",
            &csv(&["t", "x", "y", "px", "py"], rows),
        )?;
        let rows = points
            .iter()
            .map(|c| vec![c.t, c.position.x, c.position.y, c.momentum.x, c.momentum.y]);
        self.write(
            &mut rec,
            "fig1_caustic_points.csv",
            &csv(&["t", "x", "y", "px", "py"], rows),
        )?;
        rec.metric("energy", traj.energy);
        rec.metric("max_energy_drift", traj.max_energy_drift());
        rec.metric("caustic_points", points.len() as f64);
        self.record(Stage::Trace, rec)
    }

    fn caustic_stage(&mut self) -> Result<(), CliError> {
        let caustic = match self
            .eigenstate
            .clone()
            .or_else(|| self.eigenstate_on_disk())
        {
            Some(e) => e.caustic,
            None => {
                let v = self.trace_vertex();
                let h = self.config.harvest(&self.model);
                harvest_caustic(&self.model, v, &h)
                    .map_err(|e| CliError::stage("caustic", e))?
                    .caustic
            }
        };
        let mut rec = StageRecord::new(self.stage_hash(Stage::Caustic));
        self.write_json(&mut rec, "caustic.json", &caustic)?;
        let mut rows = Vec::new();
        for (k, arc) in caustic.arcs.iter().enumerate() {
            for i in 0..=200 {
                let u = arc.span[0] + (arc.span[1] - arc.span[0]) * i as f64 / 200.0;
                let p = arc.point(u);
                rows.push(vec![k as f64, u, p.x, p.y]);
            }
        }
        self.write(
            &mut rec,
            "fig1_caustic.csv",
            &csv(&["arc", "u", "x", "y"], rows),
        )?;
        rec.metric("energy", caustic.energy);
        rec.metric("closure_gap", caustic.closure_gap);
        rec.metric("max_fit_rms", caustic.max_fit_rms());
        rec.metric("area", caustic.area());
        for (i, v) in caustic.vertices.iter().enumerate() {
            rec.metric(&format!("v{}_x", i + 1), v.x);
            rec.metric(&format!("v{}_y", i + 1), v.y);
        }
        self.record(Stage::Caustic, rec)
    }

    fn arcs_stage(&mut self) -> Result<(), CliError> {
        let e = self.eigenstate()?;
        let qhje = e.method == Method::Qhje;
        let mut header = vec!["arc", "u", "x", "y", "psi", "p_cl", "x_cl"];
        if qhje {
            header.extend(["x_q", "amplitude"]);
        }
        let mut rows = Vec::new();
        let mut rec = StageRecord::new(self.stage_hash(Stage::Arcs));
        for w in &e.waves {
            let arc = &e.caustic.arcs[w.arc];
            for (i, &u) in w.span_u().iter().enumerate() {
                let p = arc.point(u);
                let mut row = vec![w.arc as f64, u, p.x, p.y, w.psi_at(u), w.p_cl[i], w.x_cl[i]];
                if qhje {
                    row.extend([w.x[i], w.c.abs() * w.a[i]]);
                }
                rows.push(row);
            }
            let name = ARC_NAMES[w.arc];
            rec.metric(&format!("nodes_{name}"), w.nodes as f64);
            rec.metric(&format!("c_{name}"), w.c);
            if qhje {
                let r = qhje_residuals(&self.model, arc, w);
                rec.metric(&format!("residual_real_{name}"), r.real_part);
                rec.metric(&format!("residual_imag_{name}"), r.imaginary_part);
            }
        }
        self.write(&mut rec, "fig2_arcs.csv", &csv(&header, rows))?;
        rec.metric("energy", e.energy);
        rec.metric("opposite_mismatch", e.opposite_mismatch);
        self.record(Stage::Arcs, rec)
    }

    /// Build the fields of the configured method without writing anything.
    pub fn compute_fields(&mut self) -> Result<Fields, CliError> {
        let e = self.eigenstate()?;
        let err = |x: StageError| CliError::stage("field", x);
        let f = field_products(&self.model, &self.config, &e).map_err(err)?;
        self.fields = Some(f.0.clone());
        Ok(f)
    }

    fn field_stage(&mut self) -> Result<(), CliError> {
        let (products, grids, metrics) = self.compute_fields()?;
        let mut rec = StageRecord::new(self.stage_hash(Stage::Field));
        let n = self.config.field.raster;
        for (name, f) in &grids {
            let rows = f.raster(n, n).into_iter().map(|(x, y, v)| vec![x, y, v]);
            self.write(&mut rec, name, &csv(&["x", "y", "value"], rows))?;
        }
        let mesh_name = format!("mesh_interior_{}.txt", self.method());
        self.write(&mut rec, &mesh_name, &products.interior.mesh.to_text())?;
        for (k, v) in metrics {
            rec.metric(&k, v);
        }
        rec.metric("energy", products.interior.energy);
        self.record(Stage::Field, rec)
    }

    fn spectrum(&mut self) -> Result<Spectrum, CliError> {
        if let Some(s) = &self.spectrum {
            return Ok(s.clone());
        }
        let [nx, ny] = self.config.oracle.basis;
        let s = diagonalize(&self.model, nx, ny).map_err(|e| CliError::stage("oracle", e))?;
        self.spectrum = Some(s.clone());
        Ok(s)
    }

    fn oracle_state(&mut self) -> Result<(Spectrum, usize), CliError> {
        let s = self.spectrum()?;
        let [n1, n2] = self.config.search.state;
        let m = &self.model;
        let guess = m.hbar * (m.omega_x * (n1 as f64 + 0.5) + m.omega_y * (n2 as f64 + 0.5));
        let i = s
            .find(n1, n2, guess)
            .ok_or_else(|| CliError::stage("oracle", StageError::NoOracleState((n1, n2))))?;
        Ok((s, i))
    }

    fn oracle_stage(&mut self) -> Result<(), CliError> {
        let (s, i) = self.oracle_state()?;
        let mut rec = StageRecord::new(self.stage_hash(Stage::Oracle));
        #[derive(Serialize)]
        struct Level {
            index: usize,
            energy: f64,
            dominant: (usize, usize),
        }
        #[derive(Serialize)]
        struct SpectrumFile {
            basis: (usize, usize),
            target: usize,
            levels: Vec<Level>,
        }
        let levels = (0..s.energies.len().min(60))
            .map(|k| Level {
                index: k,
                energy: crate::manifest::round9(s.energies[k]),
                dominant: s.dominant(k),
            })
            .collect();
        self.write_json(
            &mut rec,
            "spectrum.json",
            &SpectrumFile {
                basis: s.basis,
                target: i,
                levels,
            },
        )?;
        let (lo, hi) = self.oracle_box();
        let n = self.config.oracle.raster;
        let f = oracle_wavefunction(&s, i, lo, hi, n - 1, n - 1)
            .map_err(|e| CliError::stage("oracle", e))?;
        let rows = f.raster(n, n).into_iter().map(|(x, y, v)| vec![x, y, v]);
        self.write(
            &mut rec,
            "oracle_grid.csv",
            &csv(&["x", "y", "value"], rows),
        )?;
        rec.metric("energy", s.energies[i]);
        rec.metric("state_index", i as f64);
        self.record(Stage::Oracle, rec)
    }

    fn oracle_box(&self) -> (Point2, Point2) {
        let r = self.config.oracle.extent;
        (Point2::new(-r, -r), Point2::new(r, r))
    }

    fn compare_stage(&mut self) -> Result<(), CliError> {
        let products = match self.fields.clone() {
            Some(p) if p.method == self.method() => p,
            _ => self.compute_fields()?.0,
        };
        let (s, i) = self.oracle_state()?;
        let (lo, hi) = self.oracle_box();
        let n = self.config.oracle.raster;
        let oracle = oracle_wavefunction(&s, i, lo, hi, n - 1, n - 1)
            .map_err(|e| CliError::stage("compare", e))?;
        let report = compare_with_oracle(&products, &oracle, self.config.oracle.compare_raster)
            .map_err(|e| CliError::stage("compare", e))?;
        let mut rec = StageRecord::new(self.stage_hash(Stage::Compare));
        rec.metric("rel_l2_interior", report.interior.rel_l2);
        rec.metric("sign", report.interior.sign);
        rec.metric("points", report.interior.points as f64);
        if let Some(w) = report.welded {
            rec.metric("rel_l2_full", w.rel_l2);
        }
        rec.metric("oracle_energy", s.energies[i]);
        rec.metric("field_energy", products.interior.energy);
        let name = format!("compare_{}.json", self.method());
        let metrics = rec.metrics.clone();
        self.write_json(&mut rec, &name, &metrics)?;
        self.record(Stage::Compare, rec)
    }
}

fn short_hash(s: &str) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(s.as_bytes())
        .iter()
        .take(16)
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct OracleReport {
    pub interior: causticwave::oracle::Comparison,
    pub welded: Option<causticwave::oracle::Comparison>,
}

/// Relative L2 distance to the oracle inside the caustic and, for SE, over
/// the whole welded domain.
pub fn compare_with_oracle(
    p: &FieldProducts,
    oracle: &FieldSolution,
    n: usize,
) -> Result<OracleReport, StageError> {
    let poly = p.caustic.polygon(400);
    let (lo, hi) = bounding_box(&poly);
    let interior = compare_fields(&p.interior, oracle, lo, hi, n, |q| {
        point_in_polygon(&poly, q)
    })?;
    let welded = match &p.welded {
        Some(w) => {
            let (lo, hi) = bounding_box(&w.mesh.vertices);
            Some(compare_fields(w, oracle, lo, hi, n, |_| true)?)
        }
        None => None,
    };
    Ok(OracleReport { interior, welded })
}

fn lines_through(c: &Caustic) -> ((Point2, Point2), (Point2, Point2)) {
    let mid = |k: usize| {
        let a = &c.arcs[k];
        a.point(0.5 * (a.span[0] + a.span[1]))
    };
    // Horizontal chord between the lateral arcs, vertical between upper and lower.
    ((mid(0), mid(2)), (mid(3), mid(1)))
}

pub type Fields = (
    FieldProducts,
    Vec<(&'static str, FieldSolution)>,
    BTreeMap<String, f64>,
);

/// Fields, named rasters and metrics for the eigenstate's method.
pub fn field_products(
    model: &Model,
    config: &PipelineConfig,
    e: &Eigenstate,
) -> StageResult<Fields> {
    let h = config.field.h;
    let parity = config.search.parity;
    let caustic = e.caustic.clone();
    let ring = CausticRing::new(&caustic, h)?;
    let inner: Arc<Mesh> = Arc::new(mesh_interior_on(&ring, h)?);
    let mut metrics = BTreeMap::new();
    let mut grids = Vec::new();
    let ((xa, xb), (ya, yb)) = lines_through(&caustic);
    metrics.insert("interior_vertices".into(), inner.vertices.len() as f64);
    let (interior, welded) = match e.method {
        Method::Se => {
            let fi = solve_dirichlet_se(&inner, model, e.energy, &e.waves)?;
            let (lo, hi) = outer_box(model, &caustic, config.field.margin)?;
            let outer = Arc::new(mesh_exterior_on(&ring, lo, hi, h)?);
            let fe = solve_dirichlet_se(&outer, model, e.energy, &e.waves)?;
            let w = weld(&fi, &fe)?;
            let ts = turning_surface(&w.field, &caustic, 40, 1.5 * h);
            metrics.insert("c1_jump".into(), w.c1_jump);
            metrics.insert("turning_fraction".into(), ts.fraction);
            metrics.insert("parity_defect".into(), parity_defect(&w.field, parity));
            metrics.insert(
                "radial_growth".into(),
                radial_growth(model, &w.field, 36, 40),
            );
            metrics.insert("exterior_vertices".into(), outer.vertices.len() as f64);
            metrics.insert("box_x".into(), hi.x);
            metrics.insert("box_y_min".into(), lo.y);
            metrics.insert("box_y_max".into(), hi.y);
            grids.push(("fig3_interior_grid.csv", fi.clone()));
            grids.push(("fig4_exterior_grid.csv", fe));
            grids.push(("fig5_full_grid.csv", w.field.clone()));
            (fi, Some(w.field))
        }
        Method::Wkb => {
            let opts = CharacteristicOptions::default();
            let mode = config.field.amplitude;
            let mut actions = Vec::new();
            for v in [0, 1] {
                let mut c = caustic.clone();
                orient_caustic(&mut c, v);
                let a = solve_classical_action(model, &c, &inner, &opts)?;
                metrics.insert(format!("boundary_mismatch_v{}", v + 1), a.boundary_mismatch);
                metrics.insert(format!("eikonal_fraction_v{}", v + 1), a.eikonal_fraction);
                actions.push(a);
            }
            let full = wkb_field(model, &actions[0], &actions[1], mode, parity);
            grids.push(("fig6_action_v1_grid.csv", actions[0].field.clone()));
            grids.push((
                "fig7_wkb_v1_grid.csv",
                wkb_partial(model, &actions[0], mode),
            ));
            grids.push(("fig8_action_v2_grid.csv", actions[1].field.clone()));
            grids.push((
                "fig9_wkb_v2_grid.csv",
                wkb_partial(model, &actions[1], mode),
            ));
            grids.push(("fig10_wkb_grid.csv", full.clone()));
            metrics.insert("parity_defect".into(), parity_defect(&full, parity));
            (full, None)
        }
        Method::Qhje => {
            let mut parts = Vec::new();
            for v in [0, 1] {
                let (c, waves) = oriented_arcs(model, &caustic, v, &Default::default())?;
                let q = solve_qhje_field(&inner, model, &c, &waves)?;
                metrics.insert(format!("residual_real_v{}", v + 1), q.residual_real);
                metrics.insert(format!("residual_imag_v{}", v + 1), q.residual_imag);
                metrics.insert(format!("continuity_v{}", v + 1), q.continuity);
                parts.push(q);
            }
            let da = parts[0]
                .a
                .values
                .iter()
                .zip(&parts[1].a.values)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
                / parts[0].a.max_abs();
            let full = qhje_wavefunction(&parts[0], &parts[1], parity);
            metrics.insert("amplitude_difference".into(), da);
            metrics.insert("parity_defect".into(), parity_defect(&full, parity));
            grids.push(("fig11_action_v1_grid.csv", parts[0].x.clone()));
            grids.push(("fig12_amplitude_grid.csv", parts[0].a.clone()));
            grids.push(("fig13_qhje_v1_grid.csv", parts[0].psi.clone()));
            grids.push(("fig14_action_v2_grid.csv", parts[1].x.clone()));
            grids.push(("fig15_qhje_v2_grid.csv", parts[1].psi.clone()));
            grids.push(("fig16_qhje_grid.csv", full.clone()));
            (full, None)
        }
    };
    metrics.insert(
        "sign_changes_x".into(),
        sign_changes_along(&interior, xa, xb, 500) as f64,
    );
    metrics.insert(
        "sign_changes_y".into(),
        sign_changes_along(&interior, ya, yb, 500) as f64,
    );
    Ok((
        FieldProducts {
            method: e.method,
            caustic,
            interior,
            welded,
        },
        grids,
        metrics,
    ))
}

/// Read a stage record back from a manifest file.
pub fn read_manifest(dir: &Path) -> Result<Manifest, CliError> {
    let path = dir.join("manifest.json");
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Json {
        path: path.display().to_string(),
        source: e,
    })
}
