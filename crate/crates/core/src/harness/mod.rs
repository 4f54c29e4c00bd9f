//! Run configuration, convergence studies, bound audits and output files.

mod config;
mod expr;
mod output;
mod study;

pub use config::{parse_document, Node, Table, Value};
pub use expr::DensityExpr;
pub use output::{
    bound_rows, read_trajectory, trajectory_rows, BoundRow, write_csv, write_frames, write_trajectory, FileLog, Manifest, TrajectoryRow,
};
pub use study::{
    apriori_bound, audit_bounds, fit_order, run_convergence_study, ConvergenceStudy, LevelResult, OrderFit,
};

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::measure::io::read_measure;
use crate::measure::{AtomCloud, BoundingBox, Measure, MAX_CELLS};
use crate::schemes::{
    InitialData, MultiPopulationConfig, MultiScaleModel, PopulationModel, ReferenceKind, SchemeConfig, SchemeKind,
};
use crate::velocity::{DesiredField, InteractionSpec, KernelShape, KernelSpec, VelocityModel, Weight};

fn config_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Initial datum as written in the configuration.
#[derive(Debug, Clone)]
pub enum InitialSpec {
    Density {
        expr: DensityExpr,
        bbox: BoundingBox,
        quadrature: usize,
        normalize: bool,
    },
    Measure {
        path: PathBuf,
        measure: Measure,
    },
}

impl InitialSpec {
    pub fn dim(&self) -> usize {
        match self {
            InitialSpec::Density { bbox, .. } => bbox.dim(),
            InitialSpec::Measure { measure, .. } => measure.dim(),
        }
    }

    pub fn to_initial_data(&self) -> InitialData {
        match self {
            InitialSpec::Density {
                expr,
                bbox,
                quadrature,
                normalize,
            } => {
                let e = expr.clone();
                InitialData::density(move |x| e.eval(x), bbox.clone(), *quadrature, *normalize)
            }
            InitialSpec::Measure { measure, .. } => InitialData::Measure(measure.clone()),
        }
    }

    /// Upper estimate of the number of cells of side `dx` it occupies.
    fn cell_estimate(&self, dx: f64) -> f64 {
        let bbox = match self {
            InitialSpec::Density { bbox, .. } => Some(bbox.clone()),
            InitialSpec::Measure { measure, .. } => measure.support_bbox(),
        };
        bbox.map_or(0.0, |b| {
            b.lo.iter()
                .zip(&b.hi)
                .map(|(l, h)| ((h - l) / dx).floor() + 2.0)
                .product()
        })
    }
}

#[derive(Debug, Clone)]
pub struct PopulationSpec {
    pub initial: InitialSpec,
    pub model: VelocityModel,
    pub weights: Vec<f64>,
}

/// Dirac part of a multi-scale run.
#[derive(Debug, Clone)]
pub struct AtomsSpec {
    pub atoms: AtomCloud,
    pub ac_weight: f64,
    pub singular_weight: f64,
}

/// Refinement ladder of a convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct StudySpec {
    pub dx: Vec<f64>,
    pub dt: Vec<f64>,
    pub refine: usize,
    pub reference: ReferenceKind,
    /// Quadrature order used for distances.
    pub quadrature: usize,
}

/// Randomized flow-estimate audit.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditSpec {
    pub pairs: usize,
    pub atoms: usize,
    pub spread: f64,
    pub times: Vec<f64>,
}

/// A validated run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub name: String,
    pub seed: u64,
    pub kind: SchemeKind,
    pub scheme: SchemeConfig,
    pub initial: Option<InitialSpec>,
    pub model: Option<VelocityModel>,
    pub populations: Vec<PopulationSpec>,
    pub atoms: Option<AtomsSpec>,
    pub study: Option<StudySpec>,
    pub audit: Option<AuditSpec>,
    pub source: String,
}

impl RunConfig {
    pub fn dim(&self) -> usize {
        self.initial
            .as_ref()
            .map(InitialSpec::dim)
            .or_else(|| self.populations.first().map(|p| p.initial.dim()))
            .unwrap_or(0)
    }

    /// The single-population model, or an error for other kinds of runs.
    pub fn single(&self) -> Result<(InitialData, &VelocityModel)> {
        match (&self.initial, &self.model) {
            (Some(i), Some(m)) if self.populations.is_empty() => Ok((i.to_initial_data(), m)),
            _ => Err(Error::Config(
                "this command needs one `initial` and one `velocity` section".into(),
            )),
        }
    }

    pub fn multi_population(&self) -> MultiPopulationConfig {
        MultiPopulationConfig {
            populations: self
                .populations
                .iter()
                .map(|p| PopulationModel {
                    model: p.model.clone(),
                    weights: p.weights.clone(),
                })
                .collect(),
            scheme: self.scheme.clone(),
        }
    }

    pub fn multiscale_model(&self) -> Option<MultiScaleModel> {
        let a = self.atoms.as_ref()?;
        Some(MultiScaleModel {
            model: self.model.clone()?,
            ac_weight: a.ac_weight,
            singular_weight: a.singular_weight,
        })
    }

    /// Every scheme configuration the run will use, finest last.
    pub fn level_configs(&self) -> Result<Vec<SchemeConfig>> {
        match &self.study {
            None => Ok(vec![self.scheme.clone()]),
            Some(s) => s
                .dx
                .iter()
                .zip(&s.dt)
                .map(|(dx, dt)| {
                    let mut c = self.scheme.clone();
                    c.dx = *dx;
                    c.dt = *dt;
                    c.record_every = 1;
                    c.validate()?;
                    Ok(c)
                })
                .collect(),
        }
    }
}

const RUN_KEYS: &[&str] = &["name", "seed"];
const SCHEME_KEYS: &[&str] = &["kind", "T", "dt", "dx", "p", "quadrature", "substeps", "record_every", "origin"];
const INITIAL_KEYS: &[&str] = &["file", "density", "bbox", "quadrature", "normalize"];
const VELOCITY_KEYS: &[&str] = &["desired", "kernel", "alpha", "weight", "strength", "constants"];
const DESIRED_KEYS: &[&str] = &["kind", "u", "target", "gain", "max_speed"];
const KERNEL_KEYS: &[&str] = &["shape", "R", "peak"];
const POPULATION_KEYS: &[&str] = &["initial", "velocity", "weights"];
const ATOMS_KEYS: &[&str] = &["file", "points", "ac_weight", "singular_weight"];
const STUDY_KEYS: &[&str] = &["dx", "dt", "dt_over_dx", "refine", "reference", "quadrature"];
const AUDIT_KEYS: &[&str] = &["pairs", "atoms", "spread", "times"];
const SECTIONS: &[&str] = &["run", "scheme", "initial", "velocity", "populations", "atoms", "study", "audit"];

fn resolve(base: &Path, file: &str) -> PathBuf {
    let p = Path::new(file);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn parse_scheme(t: &Table) -> Result<(SchemeKind, SchemeConfig)> {
    t.check_keys(SCHEME_KEYS, "scheme")?;
    let kind_node = t.require("kind", "scheme")?;
    let kind_name = match &kind_node.value {
        Value::Number(v) => v.to_string(),
        _ => kind_node.as_str("kind")?.to_string(),
    };
    let kind = SchemeKind::from_name(&kind_name).map_err(|e| config_error(kind_node.line, e.to_string()))?;
    let num = |k: &str| -> Result<f64> { t.require(k, "scheme")?.as_f64(k) };
    let cfg = SchemeConfig {
        t_final: num("T")?,
        dt: num("dt")?,
        dx: num("dx")?,
        p: t.f64_or("p", 1.0)?,
        substeps: t.usize_or("substeps", 4)?,
        record_every: t.usize_or("record_every", 1)?,
        quadrature: t.usize_or("quadrature", 2)?,
        origin: t.get("origin").map_or(Ok(Vec::new()), |n| n.as_f64_list("origin"))?,
    };
    cfg.validate().map_err(|e| config_error(t.line, e.to_string()))?;
    Ok((kind, cfg))
}

fn parse_initial(t: &Table, base: &Path) -> Result<InitialSpec> {
    t.check_keys(INITIAL_KEYS, "initial")?;
    match (t.get("file"), t.get("density")) {
        (Some(f), None) => {
            for k in ["bbox", "quadrature", "normalize"] {
                if let Some(n) = t.get(k) {
                    return Err(config_error(n.line, format!("{k:?} applies to densities, not files")));
                }
            }
            let path = resolve(base, f.as_str("file")?);
            let measure = read_measure(&path).map_err(|e| config_error(f.line, format!("{}: {e}", path.display())))?;
            Ok(InitialSpec::Measure { path, measure })
        }
        (None, Some(d)) => {
            let bbox_node = t.require("bbox", "initial")?;
            let b = bbox_node.as_f64_list("bbox")?;
            if b.is_empty() || b.len() % 2 != 0 {
                return Err(config_error(bbox_node.line, "bbox lists the lower corner then the upper corner"));
            }
            let n = b.len() / 2;
            let bbox = BoundingBox::new(b[..n].to_vec(), b[n..].to_vec())
                .map_err(|e| config_error(bbox_node.line, e.to_string()))?;
            let expr = DensityExpr::parse(d.as_str("density")?, n).map_err(|e| config_error(d.line, e.to_string()))?;
            let quadrature = t.usize_or("quadrature", 4)?;
            if quadrature == 0 {
                return Err(config_error(t.line, "initial quadrature must be positive"));
            }
            Ok(InitialSpec::Density {
                expr,
                bbox,
                quadrature,
                normalize: t.bool_or("normalize", true)?,
            })
        }
        _ => Err(config_error(t.line, "initial needs exactly one of `file` and `density`")),
    }
}

fn parse_desired(n: &Node) -> Result<DesiredField> {
    let t = n.as_table("desired")?;
    t.check_keys(DESIRED_KEYS, "desired")?;
    let kind = t.require("kind", "desired")?;
    let field = match kind.as_str("kind")? {
        "zero" => DesiredField::Zero,
        "constant" => DesiredField::Constant(t.require("u", "desired")?.as_f64_list("u")?),
        "target" => DesiredField::AffineToTarget {
            target: t.require("target", "desired")?.as_f64_list("target")?,
            gain: t.require("gain", "desired")?.as_f64("gain")?,
            max_speed: t.require("max_speed", "desired")?.as_f64("max_speed")?,
        },
        other => {
            return Err(config_error(
                kind.line,
                format!("unknown desired field {other:?}; expected zero, constant or target"),
            ))
        }
    };
    Ok(field)
}

fn parse_velocity(t: &Table, dim: usize) -> Result<VelocityModel> {
    t.check_keys(VELOCITY_KEYS, "velocity")?;
    let desired = t.get("desired").map_or(Ok(DesiredField::Zero), parse_desired)?;
    desired.validate(dim).map_err(|e| config_error(t.line, e.to_string()))?;
    let interaction = match t.get("kernel") {
        None => {
            for k in ["alpha", "weight", "strength"] {
                if let Some(n) = t.get(k) {
                    return Err(config_error(n.line, format!("{k:?} needs a kernel")));
                }
            }
            None
        }
        Some(kn) => {
            let kt = kn.as_table("kernel")?;
            kt.check_keys(KERNEL_KEYS, "kernel")?;
            let shape = kt.get("shape").map_or(Ok("cone"), |s| s.as_str("shape"))?;
            let shape = KernelShape::from_name(shape).map_err(|e| config_error(kn.line, e.to_string()))?;
            let kernel = KernelSpec::new(
                shape,
                kt.require("R", "kernel")?.as_f64("R")?,
                kt.f64_or("peak", 1.0)?,
            )
            .map_err(|e| config_error(kn.line, e.to_string()))?;
            let weight = match t.get("weight").map_or(Ok("power"), |w| w.as_str("weight"))? {
                "power" => Weight::Power(t.f64_or("alpha", 1.0)?),
                "constant" => {
                    if let Some(n) = t.get("alpha") {
                        return Err(config_error(n.line, "alpha applies to the power weight only"));
                    }
                    Weight::Constant
                }
                other => return Err(config_error(t.line, format!("unknown weight {other:?}"))),
            };
            Some(
                InteractionSpec::new(kernel, weight, t.f64_or("strength", 1.0)?)
                    .map_err(|e| config_error(t.line, e.to_string()))?,
            )
        }
    };
    let model = VelocityModel::new(desired, interaction);
    match t.get("constants").map_or(Ok("paper"), |c| c.as_str("constants"))? {
        "paper" => Ok(model),
        "rigorous" => Ok(model.with_rigorous_constants()),
        other => Err(config_error(
            t.get("constants").map_or(t.line, |n| n.line),
            format!("unknown constants {other:?}; expected paper or rigorous"),
        )),
    }
}

fn parse_atoms(t: &Table, base: &Path, dim: usize) -> Result<AtomsSpec> {
    t.check_keys(ATOMS_KEYS, "atoms")?;
    let atoms = match (t.get("file"), t.get("points")) {
        (Some(f), None) => {
            let path = resolve(base, f.as_str("file")?);
            match read_measure(&path).map_err(|e| config_error(f.line, format!("{}: {e}", path.display())))? {
                Measure::Atoms(a) => a,
                _ => return Err(config_error(f.line, "the atoms file must hold an atomic measure")),
            }
        }
        (None, Some(p)) => {
            let mut cloud = AtomCloud::empty(dim);
            for row in p.as_list("points")? {
                let v = row.as_f64_list("point")?;
                if v.len() != dim + 1 {
                    return Err(config_error(row.line, format!("each point lists {dim} coordinates and a mass")));
                }
                cloud.push(&v[..dim], v[dim]).map_err(|e| config_error(row.line, e.to_string()))?;
            }
            cloud
        }
        _ => return Err(config_error(t.line, "atoms needs exactly one of `file` and `points`")),
    };
    if atoms.dim() != dim {
        return Err(config_error(t.line, format!("atoms have dimension {}, expected {dim}", atoms.dim())));
    }
    Ok(AtomsSpec {
        atoms,
        ac_weight: t.f64_or("ac_weight", 1.0)?,
        singular_weight: t.f64_or("singular_weight", 1.0)?,
    })
}

fn parse_study(t: &Table, scheme: &SchemeConfig) -> Result<StudySpec> {
    t.check_keys(STUDY_KEYS, "study")?;
    let dx_node = t.require("dx", "study")?;
    let dx = dx_node.as_f64_list("dx")?;
    let dt = match (t.get("dt"), t.get("dt_over_dx")) {
        (Some(n), None) => n.as_f64_list("dt")?,
        (None, Some(n)) => {
            let r = n.as_f64("dt_over_dx")?;
            dx.iter().map(|d| d * r).collect()
        }
        (None, None) => dx.clone(),
        _ => return Err(config_error(t.line, "give either `dt` or `dt_over_dx`")),
    };
    if dx.len() < 3 {
        return Err(config_error(dx_node.line, "a study needs at least 3 levels"));
    }
    if dt.len() != dx.len() {
        return Err(config_error(t.line, "`dx` and `dt` must have the same length"));
    }
    if dx.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(config_error(dx_node.line, "`dx` must be strictly decreasing"));
    }
    let finest = *dt.last().expect("nonempty");
    for (i, &d) in dt.iter().enumerate() {
        let mut c = scheme.clone();
        c.dx = dx[i];
        c.dt = d;
        c.validate().map_err(|e| config_error(t.line, format!("level {i}: {e}")))?;
        let ratio = d / finest;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio {
            return Err(config_error(
                t.line,
                format!("level {i}: dt = {d} is not a multiple of the finest dt = {finest}"),
            ));
        }
    }
    let reference = match t.get("reference").map_or(Ok("lagrangian"), |n| n.as_str("reference"))? {
        "lagrangian" | "scheme4" => ReferenceKind::Lagrangian,
        "particles" | "scheme1" => ReferenceKind::Particles,
        other => return Err(config_error(t.line, format!("unknown reference {other:?}"))),
    };
    let refine = t.usize_or("refine", 4)?;
    if refine < 2 {
        return Err(config_error(t.line, "refine must be at least 2"));
    }
    let quadrature = t.usize_or("quadrature", 1)?;
    if quadrature == 0 {
        return Err(config_error(t.line, "study quadrature must be positive"));
    }
    Ok(StudySpec {
        dx,
        dt,
        refine,
        reference,
        quadrature,
    })
}

fn parse_audit(t: &Table) -> Result<AuditSpec> {
    t.check_keys(AUDIT_KEYS, "audit")?;
    let spec = AuditSpec {
        pairs: t.usize_or("pairs", 50)?,
        atoms: t.usize_or("atoms", 6)?,
        spread: t.f64_or("spread", 0.5)?,
        times: t.get("times").map_or(Ok(vec![0.1, 0.5, 1.0]), |n| n.as_f64_list("times"))?,
    };
    if spec.pairs == 0 || spec.atoms == 0 || !(spec.spread > 0.0) || spec.times.iter().any(|t| !(*t >= 0.0)) {
        return Err(config_error(t.line, "audit needs positive pairs, atoms and spread and nonnegative times"));
    }
    Ok(spec)
}

/// Parses and validates a configuration. Relative file names resolve
/// against `base`.
pub fn parse_config(text: &str, base: &Path) -> Result<RunConfig> {
    let doc = parse_document(text)?;
    for (k, v) in &doc.entries {
        if !SECTIONS.contains(&k.as_str()) {
            return Err(config_error(v.line, format!("unknown section {k:?}; expected one of {SECTIONS:?}")));
        }
    }
    let table = |name: &str| doc.get(name).map(|n| n.as_table(name)).transpose();

    let (name, seed) = match table("run")? {
        Some(t) => {
            t.check_keys(RUN_KEYS, "run")?;
            let seed = t.usize_or("seed", 0)? as u64;
            (t.get("name").map_or(Ok("run"), |n| n.as_str("name"))?.to_string(), seed)
        }
        None => ("run".to_string(), 0),
    };
    let scheme_table = table("scheme")?.ok_or_else(|| config_error(1, "missing `scheme` section"))?;
    let (kind, scheme) = parse_scheme(scheme_table)?;

    let initial = table("initial")?.map(|t| parse_initial(t, base)).transpose()?;
    let mut populations = Vec::new();
    if let Some(pn) = doc.get("populations") {
        if initial.is_some() {
            return Err(config_error(pn.line, "use either `initial` or `populations`"));
        }
        let list = pn.as_list("populations")?;
        for item in list {
            let t = item.as_table("population")?;
            t.check_keys(POPULATION_KEYS, "population")?;
            let init = parse_initial(t.require("initial", "population")?.as_table("initial")?, base)?;
            let vel = parse_velocity(t.require("velocity", "population")?.as_table("velocity")?, init.dim())?;
            let wn = t.require("weights", "population")?;
            let weights = wn.as_f64_list("weights")?;
            if weights.len() != list.len() {
                return Err(config_error(wn.line, format!("weights must list {} entries", list.len())));
            }
            populations.push(PopulationSpec {
                initial: init,
                model: vel,
                weights,
            });
        }
        if populations.is_empty() {
            return Err(config_error(pn.line, "populations must not be empty"));
        }
        let dim = populations[0].initial.dim();
        if let Some(p) = populations.iter().find(|p| p.initial.dim() != dim) {
            return Err(config_error(pn.line, format!("population dimensions differ: {} and {dim}", p.initial.dim())));
        }
    } else if initial.is_none() {
        return Err(config_error(1, "missing `initial` or `populations` section"));
    }
    let dim = initial.as_ref().map_or_else(|| populations[0].initial.dim(), InitialSpec::dim);
    if !scheme.origin.is_empty() && scheme.origin.len() != dim {
        return Err(config_error(scheme_table.line, format!("origin must have {dim} coordinates")));
    }

    let model = match table("velocity")? {
        Some(t) => {
            if !populations.is_empty() {
                return Err(config_error(t.line, "populations carry their own `velocity`"));
            }
            Some(parse_velocity(t, dim)?)
        }
        None if populations.is_empty() => Some(VelocityModel::zero()),
        None => None,
    };
    let atoms = table("atoms")?.map(|t| parse_atoms(t, base, dim)).transpose()?;
    if atoms.is_some() && !populations.is_empty() {
        return Err(config_error(1, "`atoms` combines with `initial`, not with `populations`"));
    }
    let study = table("study")?.map(|t| parse_study(t, &scheme)).transpose()?;
    let audit = table("audit")?.map(parse_audit).transpose()?;

    let cfg = RunConfig {
        name,
        seed,
        kind,
        scheme,
        initial,
        model,
        populations,
        atoms,
        study,
        audit,
        source: text.to_string(),
    };
    check_caps(&cfg)?;
    Ok(cfg)
}

/// Rejects runs whose grids would exceed the cell cap.
fn check_caps(cfg: &RunConfig) -> Result<()> {
    let finest = cfg.level_configs()?.into_iter().map(|c| c.dx).fold(f64::INFINITY, f64::min);
    let dx = match &cfg.study {
        Some(s) => finest / s.refine as f64,
        None => finest,
    };
    let inits: Vec<&InitialSpec> = cfg.initial.iter().chain(cfg.populations.iter().map(|p| &p.initial)).collect();
    for init in inits {
        let cells = init.cell_estimate(dx);
        if cells > MAX_CELLS as f64 {
            return Err(Error::ResourceCap {
                what: "grid cells",
                count: cells.min(usize::MAX as f64) as usize,
                cap: MAX_CELLS,
            });
        }
    }
    Ok(())
}

/// Reads and parses a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text, path.parent().unwrap_or(Path::new(".")))
}
