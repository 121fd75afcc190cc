//! Configuration-driven pipelines: cover construction, loop classification,
//! certificate evaluation, conjugate-point checks, sweeps, and the torus
//! figure, with reports and diagrams written to the output directory.

use std::collections::BTreeSet;
use std::path::Path;

use serde::Serialize;

use crate::bound::{
    certificate, gain_sweep, BoundCertificate, CertificateInputs, HorizonRule, SweepConfig,
    SweepTable,
};
use crate::config::{ClassifyConfig, ClassifyMode, ExperimentConfig};
use crate::conjugate::{noconj_hypothesis_check, NoConjReport};
use crate::cover::{build_good_cover, CoverOpts, CoverVerification, TubeCover};
use crate::error::{GeobeamError, Result};
use crate::flow::{lambda_max, LambdaMax};
use crate::looping::{
    classify_iterative, classify_single, loop_relation, oracle_bad_tubes, revolution_bad_set,
    symmetry_check, torus_oracle, verify_partition, CoverPredicates, LoopFamily, LoopOpts,
    LoopPartition, LoopRelation, Provenance, RevolutionDiagnostics, RevolutionOpts, TorusOracle,
};
use crate::manifold::{Manifold, ManifoldKind};
use crate::svg::{emit_svg, SvgOptions};
use nalgebra::DVector;

/// CLI verbs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verb {
    Cover,
    Classify,
    Certify,
    Conjugate,
    Sweep,
    Figure,
}

impl Verb {
    pub fn name(&self) -> &'static str {
        match self {
            Verb::Cover => "cover",
            Verb::Classify => "classify",
            Verb::Certify => "certify",
            Verb::Conjugate => "conjugate",
            Verb::Sweep => "sweep",
            Verb::Figure => "figure",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CoverSummary {
    pub tube_count: usize,
    pub family_count: usize,
    pub tau: f64,
    pub radius: f64,
    pub verification: CoverVerification,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleSummary {
    pub direction_count: usize,
    pub bad_tube_count: usize,
    pub classifier_bad_count: usize,
    pub mismatch_indices: Vec<usize>,
    pub exact_match: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SymmetrySummary {
    pub checked: usize,
    pub mismatches: usize,
}

/// The full run report; every number is traceable to a config key (the
/// resolved config is embedded) or a computed field.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub verb: String,
    pub config: ExperimentConfig,
    pub resolved_radius: Option<f64>,
    pub cover: Option<CoverSummary>,
    pub partition: Option<LoopPartition>,
    pub symmetry: Option<SymmetrySummary>,
    pub oracle: Option<OracleSummary>,
    pub predicates: Option<CoverPredicates>,
    pub lambda: Option<LambdaMax>,
    pub certificate: Option<BoundCertificate>,
    pub conjugate: Option<NoConjReport>,
    pub sweep: Option<SweepTable>,
    pub revolution: Option<RevolutionDiagnostics>,
}

impl Report {
    fn new(verb: Verb, config: &ExperimentConfig) -> Report {
        Report {
            verb: verb.name().to_string(),
            config: config.clone(),
            resolved_radius: None,
            cover: None,
            partition: None,
            symmetry: None,
            oracle: None,
            predicates: None,
            lambda: None,
            certificate: None,
            conjugate: None,
            sweep: None,
            revolution: None,
        }
    }
}

fn cover_opts(config: &ExperimentConfig) -> CoverOpts {
    let c = config.cover.as_ref();
    CoverOpts {
        tau_max: 0.2,
        r_max: 0.2,
        family_cap: c.map(|c| c.family_cap).unwrap_or(64),
        verify_samples: c.map(|c| c.verify_samples).unwrap_or(10_000),
        seed: config.seeds.cover,
        flow: config.flow.to_opts(),
    }
}

fn loop_opts(config: &ExperimentConfig) -> LoopOpts {
    LoopOpts {
        seeds_per_cap: 32,
        times_per_window: 200,
        margin_frac: 0.1,
        seed: config.seeds.loops,
        flow: config.flow.to_opts(),
    }
}

struct Pipeline<'a> {
    config: &'a ExperimentConfig,
    m: Manifold,
    x: DVector<f64>,
    report: Report,
}

impl<'a> Pipeline<'a> {
    fn new(verb: Verb, config: &'a ExperimentConfig) -> Result<Pipeline<'a>> {
        let m = config.manifold.build()?;
        let x = DVector::from_vec(config.base_point.coords.clone());
        m.check_chart(&x)?;
        Ok(Pipeline {
            config,
            m,
            x,
            report: Report::new(verb, config),
        })
    }

    fn build_cover(&mut self) -> Result<TubeCover> {
        let cfg = self
            .config
            .cover
            .as_ref()
            .ok_or_else(|| GeobeamError::Config("missing [cover] section".into()))?;
        let radius = cfg.resolve_radius();
        let opts = cover_opts(self.config);
        let cover = build_good_cover(&self.m, &self.x, cfg.tau, radius, &opts)?;
        self.report.resolved_radius = Some(radius);
        self.report.cover = Some(CoverSummary {
            tube_count: cover.len(),
            family_count: cover.family_count,
            tau: cover.tau,
            radius: cover.radius,
            verification: cover.verification.clone(),
        });
        Ok(cover)
    }

    fn classify(&mut self, cover: &TubeCover) -> Result<(LoopPartition, Option<LoopRelation>)> {
        let cfg = self
            .config
            .classify
            .as_ref()
            .ok_or_else(|| GeobeamError::Config("missing [classify] section".into()))?
            .clone();
        let lopts = loop_opts(self.config);
        let (partition, fwd) = run_classifier(&self.m, &self.x, cover, &cfg, &lopts)?;
        if let Some(rel) = &fwd {
            let (checked, mismatches) = symmetry_check(&self.m, cover, rel, 100, &lopts);
            self.report.symmetry = Some(SymmetrySummary { checked, mismatches });
        }
        let mut partition = partition;
        verify_partition(&self.m, cover, &mut partition, cfg.verify_seeds, &lopts)?;
        if let Some(v) = &partition.verification {
            if v.violations > 0 {
                return Err(GeobeamError::Verification(format!(
                    "{} soundness violations in good families",
                    v.violations
                )));
            }
        }
        self.report.predicates = Some(crate::looping::cover_predicates(
            &partition,
            cover.radius,
            cfg.t_max,
            self.m.dim(),
        ));
        self.report.partition = Some(partition.clone());
        Ok((partition, fwd))
    }
}

fn run_classifier(
    m: &Manifold,
    x: &DVector<f64>,
    cover: &TubeCover,
    cfg: &ClassifyConfig,
    lopts: &LoopOpts,
) -> Result<(LoopPartition, Option<LoopRelation>)> {
    match cfg.mode {
        ClassifyMode::Single | ClassifyMode::Iterative => {
            let fwd = loop_relation(m, cover, cfg.t0, cfg.t_max, 1, lopts)?;
            let partition = if cfg.mode == ClassifyMode::Iterative {
                classify_iterative(&fwd, cfg.t0, cfg.t_max, cfg.contraction)?
            } else if cfg.bidirectional {
                let bwd = loop_relation(m, cover, cfg.t0, cfg.t_max, -1, lopts)?;
                classify_single(&[&fwd, &bwd], cfg.t0, cfg.t_max)?
            } else {
                classify_single(&[&fwd], cfg.t0, cfg.t_max)?
            };
            Ok((partition, Some(fwd)))
        }
        ClassifyMode::TorusOracle => {
            if !matches!(m.kind, ManifoldKind::FlatTorus { .. }) {
                return Err(GeobeamError::Config(
                    "torus-oracle mode needs a flat torus".into(),
                ));
            }
            let oracle = torus_oracle(cfg.t0, cfg.t_max, cover.radius, cover.tau);
            let bad = oracle_bad_tubes(&oracle, cover);
            let good: Vec<usize> = (0..cover.len()).filter(|i| !bad.contains(i)).collect();
            Ok((
                LoopPartition {
                    bad: bad.into_iter().collect(),
                    families: vec![LoopFamily {
                        indices: good,
                        t_lo: cfg.t0,
                        t_hi: cfg.t_max,
                    }],
                    provenance: Provenance::TorusOracle,
                    verification: None,
                },
                None,
            ))
        }
        ClassifyMode::Revolution => {
            let (bad, _diag) = revolution_bad_set(
                m,
                x,
                cover,
                cfg.t0,
                cfg.t_max,
                cfg.alpha1,
                &RevolutionOpts::default(),
            )?;
            let good: Vec<usize> = (0..cover.len()).filter(|i| !bad.contains(i)).collect();
            Ok((
                LoopPartition {
                    bad: bad.into_iter().collect(),
                    families: vec![LoopFamily {
                        indices: good,
                        t_lo: cfg.t0,
                        t_hi: cfg.t_max,
                    }],
                    provenance: Provenance::Revolution,
                    verification: None,
                },
                None,
            ))
        }
    }
}

/// Execute a verb; artifacts land in the configured output directory.
pub fn run(verb: Verb, config: &ExperimentConfig) -> Result<Report> {
    let outdir = Path::new(&config.output.dir);
    std::fs::create_dir_all(outdir)?;
    let mut pipe = Pipeline::new(verb, config)?;
    let mut relation_export: Option<&LoopRelation> = None;
    let relation_storage;
    match verb {
        Verb::Cover => {
            let cover = pipe.build_cover()?;
            write_tubes_csv(outdir, &cover, None)?;
            maybe_svg(&pipe, outdir, &cover, &empty_partition(&cover), &[])?;
        }
        Verb::Classify => {
            let cover = pipe.build_cover()?;
            let (partition, rel) = pipe.classify(&cover)?;
            write_tubes_csv(outdir, &cover, Some(&partition))?;
            maybe_svg(&pipe, outdir, &cover, &partition, &[])?;
            relation_storage = rel;
            relation_export = relation_storage.as_ref();
        }
        Verb::Certify => {
            let cover = pipe.build_cover()?;
            let (partition, rel) = pipe.classify(&cover)?;
            let cfg = pipe.config.cover.as_ref().unwrap();
            let (lam, _diag) = lambda_max(&pipe.m, &pipe.x, 16, 20.0, &config.flow.to_opts())?;
            let cert = certificate(
                &partition,
                CertificateInputs {
                    n: pipe.m.dim(),
                    h: cfg.h,
                    delta: cfg.delta,
                    tau: cfg.tau,
                    radius: cover.radius,
                    family_count: cover.family_count,
                    lambda_max: lam.value,
                    lambda_replaced_zero: lam.replaced_zero,
                    alpha: None,
                },
            )?;
            pipe.report.lambda = Some(lam);
            pipe.report.certificate = Some(cert);
            write_tubes_csv(outdir, &cover, Some(&partition))?;
            maybe_svg(&pipe, outdir, &cover, &partition, &[])?;
            relation_storage = rel;
            relation_export = relation_storage.as_ref();
        }
        Verb::Conjugate => {
            let cfg = config
                .conjugate
                .as_ref()
                .ok_or_else(|| GeobeamError::Config("missing [conjugate] section".into()))?;
            let rep = noconj_hypothesis_check(
                &pipe.m,
                &pipe.x,
                cfg.a,
                &cfg.t_grid,
                cfg.direction_count,
                &config.flow.to_opts(),
            )?;
            pipe.report.conjugate = Some(rep);
        }
        Verb::Sweep => {
            let sweep_cfg = config
                .sweep
                .as_ref()
                .ok_or_else(|| GeobeamError::Config("missing [sweep] section".into()))?;
            let classify_cfg = config
                .classify
                .as_ref()
                .ok_or_else(|| GeobeamError::Config("missing [classify] section".into()))?;
            let cover_cfg = config
                .cover
                .as_ref()
                .ok_or_else(|| GeobeamError::Config("missing [cover] section".into()))?;
            let (lam, _diag) = lambda_max(&pipe.m, &pipe.x, 8, 20.0, &config.flow.to_opts())?;
            let rule = match sweep_cfg.exponent {
                Some(e) => HorizonRule::PowerLaw { exponent: e },
                None => HorizonRule::Fixed(classify_cfg.t_max),
            };
            let table = gain_sweep(
                &pipe.m,
                &pipe.x,
                &SweepConfig {
                    radii: sweep_cfg.radii.clone(),
                    rule,
                    t0: classify_cfg.t0,
                    tau: cover_cfg.tau,
                    delta: cover_cfg.delta,
                    radius_scale: cover_cfg.radius_scale,
                    lambda_max: lam.value,
                    lambda_replaced_zero: lam.replaced_zero,
                },
                &cover_opts(config),
                &loop_opts(config),
            )?;
            std::fs::write(outdir.join("sweep.csv"), table.to_csv())?;
            pipe.report.lambda = Some(lam);
            pipe.report.sweep = Some(table);
        }
        Verb::Figure => {
            if !matches!(pipe.m.kind, ManifoldKind::FlatTorus { .. }) {
                return Err(GeobeamError::Config("the figure verb runs on the flat torus".into()));
            }
            let cover = pipe.build_cover()?;
            let (partition, rel) = pipe.classify(&cover)?;
            let cfg = pipe.config.classify.as_ref().unwrap();
            let oracle = torus_oracle(cfg.t0, cfg.t_max, cover.radius, cover.tau);
            let oracle_bad = oracle_bad_tubes(&oracle, &cover);
            let classifier_bad: BTreeSet<usize> = partition.bad.iter().cloned().collect();
            let mismatches: Vec<usize> = oracle_bad
                .symmetric_difference(&classifier_bad)
                .cloned()
                .collect();
            pipe.report.oracle = Some(OracleSummary {
                direction_count: oracle.directions.len(),
                bad_tube_count: oracle_bad.len(),
                classifier_bad_count: classifier_bad.len(),
                exact_match: mismatches.is_empty(),
                mismatch_indices: mismatches.clone(),
            });
            write_tubes_csv(outdir, &cover, Some(&partition))?;
            maybe_svg_figure(&pipe, outdir, &cover, &partition, &oracle, &mismatches)?;
            relation_storage = rel;
            relation_export = relation_storage.as_ref();
        }
    }
    if config.output.relation {
        if let Some(rel) = relation_export {
            std::fs::write(
                outdir.join("relation.json"),
                serde_json::to_string_pretty(&export_relation(rel))
                    .map_err(|e| GeobeamError::Io(std::io::Error::other(e)))?,
            )?;
        }
    }
    let json = serde_json::to_string_pretty(&pipe.report)
        .map_err(|e| GeobeamError::Io(std::io::Error::other(e)))?;
    std::fs::write(outdir.join("report.json"), json)?;
    Ok(pipe.report)
}

fn empty_partition(cover: &TubeCover) -> LoopPartition {
    LoopPartition {
        bad: vec![],
        families: vec![LoopFamily {
            indices: (0..cover.len()).collect(),
            t_lo: 0.0,
            t_hi: 0.0,
        }],
        provenance: Provenance::SingleStage,
        verification: None,
    }
}

#[derive(Serialize)]
struct RelationPairExport {
    i: usize,
    j: usize,
    intervals: Vec<(f64, f64)>,
    witness: f64,
}

#[derive(Serialize)]
struct RelationExport {
    window: (f64, f64),
    direction: i8,
    tube_count: usize,
    pairs: Vec<RelationPairExport>,
}

fn export_relation(rel: &LoopRelation) -> RelationExport {
    RelationExport {
        window: rel.window,
        direction: rel.direction,
        tube_count: rel.tube_count,
        pairs: rel
            .meetings
            .iter()
            .map(|((i, j), ivals)| RelationPairExport {
                i: *i,
                j: *j,
                intervals: ivals.clone(),
                witness: rel.witness.get(&(*i, *j)).cloned().unwrap_or(f64::INFINITY),
            })
            .collect(),
    }
}

fn write_tubes_csv(outdir: &Path, cover: &TubeCover, partition: Option<&LoopPartition>) -> Result<()> {
    let bad: BTreeSet<usize> = partition
        .map(|p| p.bad.iter().cloned().collect())
        .unwrap_or_default();
    let mut out = String::from("index,angle,color,class\n");
    for tube in &cover.tubes {
        let ang = tube.center.xi[1].atan2(tube.center.xi[0]);
        let class = if partition.is_none() {
            "unclassified"
        } else if bad.contains(&tube.index) {
            "bad"
        } else {
            "good"
        };
        out.push_str(&format!("{},{:.12e},{},{}\n", tube.index, ang, tube.color, class));
    }
    std::fs::write(outdir.join("tubes.csv"), out)?;
    Ok(())
}

fn maybe_svg(
    pipe: &Pipeline<'_>,
    outdir: &Path,
    cover: &TubeCover,
    partition: &LoopPartition,
    mismatches: &[usize],
) -> Result<()> {
    if !pipe.config.output.svg || pipe.m.dim() != 2 {
        return Ok(());
    }
    let mut opts = SvgOptions::default();
    if let Some(cfg) = &pipe.config.classify {
        opts.circles = vec![cfg.t0, cfg.t_max];
    }
    opts.lattice = matches!(pipe.m.kind, ManifoldKind::FlatTorus { .. });
    opts.mismatches = mismatches.iter().cloned().collect();
    let svg = emit_svg(cover, partition, &opts)?;
    std::fs::write(outdir.join("fiber.svg"), svg)?;
    Ok(())
}

fn maybe_svg_figure(
    pipe: &Pipeline<'_>,
    outdir: &Path,
    cover: &TubeCover,
    partition: &LoopPartition,
    _oracle: &TorusOracle,
    mismatches: &[usize],
) -> Result<()> {
    maybe_svg(pipe, outdir, cover, partition, mismatches)
}
