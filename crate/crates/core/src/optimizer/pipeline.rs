//! The mapping pipeline: association per keyframe, Stage I pose-graph
//! solves, relation inference and Stage II contact refinement.

use nalgebra::Matrix6;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use super::graph::{sqrt_information, Factor, FactorGraph, VarKey};
use super::residuals::{contact_signs, FeatureGeom};
use super::solver::{solve, SolveReport, SolverConfig};
use super::OptimizerError;
use crate::association::{
    associate_frame, false_positive_score, gate_covariance, measurement_scores, merge_overlapping, prune_false_positives, AssocConfig,
    AssocError, ScoreConfig, Scoring, TraceRecord, TrackedObject,
};
use crate::geometry::{ModelRegistry, Pose};
use crate::relations::{
    infer_relations, member_features, member_pose, relation_records, ContactRelation, Placement, RelationConfig,
    RelationError, RelationRecord, TABLE_ID,
};
use crate::sim::{Dataset, NoiseSpec, Table};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Association(#[from] AssocError),
    #[error(transparent)]
    Relation(#[from] RelationError),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
    #[error("dataset is inconsistent: {0}")]
    Dataset(String),
}

/// Which parts of the system run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    /// Raw measurements of the current frame, no tracking.
    #[serde(rename = "fbf")]
    Fbf,
    /// Tracking with detector confidence instead of geometric scores and
    /// no contact refinement.
    #[serde(rename = "b-slam")]
    BSlam,
    /// Geometric association only; no graph optimization.
    #[serde(rename = "r-front")]
    RFront,
    /// Everything.
    #[serde(rename = "geofusion")]
    GeoFusion,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Fbf, Variant::BSlam, Variant::RFront, Variant::GeoFusion];

    pub fn name(&self) -> &'static str {
        match self {
            Variant::Fbf => "fbf",
            Variant::BSlam => "b-slam",
            Variant::RFront => "r-front",
            Variant::GeoFusion => "geofusion",
        }
    }

    fn scoring(&self) -> Scoring {
        match self {
            Variant::BSlam => Scoring::Confidence,
            _ => Scoring::Geometric,
        }
    }

    fn optimizes(&self) -> bool {
        matches!(self, Variant::BSlam | Variant::GeoFusion)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| format!("unknown variant '{s}' (expected fbf, b-slam, r-front or geofusion)"))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub score: ScoreConfig,
    pub assoc: AssocConfig,
    pub relations: RelationConfig,
    pub solver: SolverConfig,
}

impl PipelineConfig {
    /// Defaults with the association gate and the solver covariances
    /// matched to `noise`.
    pub fn for_noise(noise: &NoiseSpec) -> Self {
        Self {
            assoc: AssocConfig {
                meas_noise: gate_covariance(noise.meas_sigma),
                ..AssocConfig::default()
            },
            solver: SolverConfig::from_noise(noise),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.score.validate()?;
        self.assoc.validate()?;
        self.relations.validate()?;
        self.solver.validate()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapObject {
    pub id: u32,
    #[serde(rename = "class")]
    pub class_id: u32,
    pub pose: Pose,
    /// False-positive score; for raw measurements, one minus confidence.
    pub f_j: f64,
    pub n_meas: usize,
    /// Ranking score used for detection metrics.
    pub score: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FrameTimings {
    pub assoc_ms: f64,
    pub stage1_ms: f64,
    pub relations_ms: f64,
    pub stage2_ms: f64,
}

impl FrameTimings {
    pub fn total_ms(&self) -> f64 {
        self.assoc_ms + self.stage1_ms + self.relations_ms + self.stage2_ms
    }
}

/// Map state published after one keyframe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KeyframeMap {
    pub t: usize,
    /// Estimated camera pose.
    pub camera: Pose,
    pub objects: Vec<MapObject>,
    /// Active relations with their unweighted terms at the published poses.
    pub relations: Vec<RelationRecord>,
    /// Final cost of the last solve run at this keyframe.
    pub cost: Option<f64>,
    #[serde(rename = "timings_ms")]
    pub timings: FrameTimings,
}

#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub variant: Variant,
    pub maps: Vec<KeyframeMap>,
    pub trace: Vec<TraceRecord>,
    /// Tracks alive at the end, with Stage I poses.
    pub tracks: Vec<TrackedObject>,
    pub stage1_reports: Vec<(usize, SolveReport)>,
}

impl PipelineOutput {
    pub fn final_map(&self) -> Option<&KeyframeMap> {
        self.maps.last()
    }
}

fn ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn placements(tracks: &[TrackedObject]) -> Vec<Placement> {
    tracks
        .iter()
        .map(|o| Placement {
            id: o.id,
            class_id: o.class_id,
            pose: o.pose,
        })
        .collect()
}

struct Runner<'a> {
    ds: &'a Dataset,
    cfg: &'a PipelineConfig,
    meas_sqrt: Matrix6<f64>,
    odom_sqrt: Matrix6<f64>,
}

impl Runner<'_> {
    fn stage1(&self, robots: &mut [Pose], tracks: &mut [TrackedObject]) -> Result<SolveReport, PipelineError> {
        let mut g = FactorGraph::new();
        for (t, x) in robots.iter().enumerate() {
            g.add_variable(VarKey::Robot(t), *x);
        }
        for o in tracks.iter() {
            g.add_variable(VarKey::Object(o.id), o.pose);
        }
        g.add_factor(Factor::Prior {
            key: VarKey::Robot(0),
            prior: self.ds.initial_pose,
            sqrt_info: Matrix6::identity() * self.cfg.solver.gauge_weight,
        })?;
        for t in 1..robots.len() {
            g.add_factor(Factor::Odometry {
                from: t - 1,
                to: t,
                odo: self.ds.odometry[t - 1],
                sqrt_info: self.odom_sqrt,
            })?;
        }
        for o in tracks.iter() {
            let symmetry = self.ds.registry.get(o.class_id).ok().and_then(|m| m.symmetry_axis);
            for m in &o.measurement_log {
                let z = self.ds.frames[m.t]
                    .measurements
                    .get(m.index)
                    .ok_or_else(|| PipelineError::Dataset(format!("measurement {} of frame {} missing", m.index, m.t)))?;
                g.add_factor(Factor::Measurement {
                    t: m.t,
                    object: o.id,
                    z: z.pose,
                    sqrt_info: self.meas_sqrt,
                    symmetry,
                })?;
            }
        }
        let report = solve(&mut g, &self.cfg.solver)?;
        for (t, x) in robots.iter_mut().enumerate() {
            *x = g.variables[&VarKey::Robot(t)];
        }
        for o in tracks.iter_mut() {
            o.pose = g.variables[&VarKey::Object(o.id)];
        }
        Ok(report)
    }
}

/// Stage II: object poses under contact factors, each related object held
/// by a prior at its input pose with covariance `meas_cov / prior_scale`.
/// Objects without relations come back unchanged.
pub fn refine_with_contacts(
    objects: &[Placement],
    relations: &[ContactRelation],
    table: &Table,
    registry: &ModelRegistry,
    solver: &SolverConfig,
) -> Result<(BTreeMap<u32, Pose>, Option<SolveReport>), PipelineError> {
    let mut out: BTreeMap<u32, Pose> = objects.iter().map(|o| (o.id, o.pose)).collect();
    if relations.is_empty() {
        return Ok((out, None));
    }
    let prior_sqrt = sqrt_information(&(solver.meas_cov / solver.prior_scale))?;
    let mut g = FactorGraph::new();
    for r in relations {
        for id in [r.obj_a, r.obj_b] {
            if id != TABLE_ID && !g.variables.contains_key(&VarKey::Object(id)) {
                let pose = *out.get(&id).ok_or(RelationError::UnknownObject(id))?;
                g.add_variable(VarKey::Object(id), pose);
                g.add_factor(Factor::Prior {
                    key: VarKey::Object(id),
                    prior: pose,
                    sqrt_info: prior_sqrt,
                })?;
            }
        }
    }
    for r in relations {
        let fa = FeatureGeom::of(&member_features(r.obj_a, objects, table, registry)?[r.feat_a]);
        let fb = FeatureGeom::of(&member_features(r.obj_b, objects, table, registry)?[r.feat_b]);
        let pa = member_pose(r.obj_a, objects).ok_or(RelationError::UnknownObject(r.obj_a))?;
        let pb = member_pose(r.obj_b, objects).ok_or(RelationError::UnknownObject(r.obj_b))?;
        g.add_factor(Factor::Contact {
            relation: *r,
            fa,
            fb,
            signs: contact_signs(r.kind, &pa, &fa, &pb, &fb),
            w_p: solver.w_p,
            w_q: solver.w_q,
        })?;
    }
    let report = solve(&mut g, solver)?;
    for (k, p) in &g.variables {
        if let VarKey::Object(id) = k {
            out.insert(*id, *p);
        }
    }
    Ok((out, Some(report)))
}

/// Runs `variant` over the whole dataset and returns the map after every
/// keyframe.
pub fn run_pipeline(ds: &Dataset, cfg: &PipelineConfig, variant: Variant) -> Result<PipelineOutput, PipelineError> {
    cfg.validate()?;
    if ds.odometry.len() + 1 != ds.frames.len() {
        return Err(PipelineError::Dataset("odometry must have one entry fewer than frames".into()));
    }
    let runner = Runner {
        ds,
        cfg,
        meas_sqrt: sqrt_information(&cfg.solver.meas_cov)?,
        odom_sqrt: sqrt_information(&cfg.solver.odom_cov)?,
    };
    let n = ds.frames.len();
    let mut robots: Vec<Pose> = Vec::with_capacity(n);
    let mut tracks: Vec<TrackedObject> = Vec::new();
    let mut next_id = 1u32;
    let mut maps = Vec::with_capacity(n);
    let mut trace = Vec::new();
    let mut stage1_reports = Vec::new();

    for (t, rec) in ds.frames.iter().enumerate() {
        let x_t = match t {
            0 => ds.initial_pose,
            _ => robots[t - 1].compose(&ds.odometry[t - 1]),
        };
        robots.push(x_t);
        let mut timings = FrameTimings::default();
        let mut cost = None;

        if variant == Variant::Fbf {
            let start = Instant::now();
            let objects = rec
                .measurements
                .iter()
                .enumerate()
                .map(|(k, z)| MapObject {
                    id: k as u32 + 1,
                    class_id: z.class_id,
                    pose: x_t.compose(&z.pose),
                    f_j: 1.0 - z.confidence,
                    n_meas: 1,
                    score: z.confidence,
                })
                .collect();
            timings.assoc_ms = ms(start);
            maps.push(KeyframeMap {
                t,
                camera: x_t,
                objects,
                relations: Vec::new(),
                cost,
                timings,
            });
            continue;
        }

        let start = Instant::now();
        let scores = measurement_scores(&rec.measurements, &rec.frame, &ds.registry, &cfg.score, variant.scoring());
        let (_, frame_trace) = associate_frame(
            &rec.measurements,
            &scores,
            &mut tracks,
            &robots[t],
            &ds.registry,
            &cfg.assoc,
            &mut next_id,
        );
        trace.extend(frame_trace);
        if variant == Variant::RFront {
            // front-end estimate: the best-scoring measurement
            for o in tracks.iter_mut() {
                if let Some(best) = o.best_measurement() {
                    let z = &ds.frames[best.t].measurements[best.index];
                    o.pose = robots[best.t].compose(&z.pose);
                }
            }
        }
        merge_overlapping(&mut tracks, &ds.registry, &cfg.assoc);
        if cfg.assoc.prune_every.is_some_and(|k| (t + 1) % k == 0) || t + 1 == n {
            prune_false_positives(&mut tracks, cfg.assoc.eps_fp);
        }
        timings.assoc_ms = ms(start);

        if variant.optimizes() && ((t + 1) % cfg.solver.stage1_every == 0 || t + 1 == n) {
            let start = Instant::now();
            let report = runner.stage1(&mut robots, &mut tracks)?;
            cost = Some(report.final_cost);
            stage1_reports.push((t, report));
            timings.stage1_ms = ms(start);
        }

        let mut published: BTreeMap<u32, Pose> = tracks.iter().map(|o| (o.id, o.pose)).collect();
        let mut relations = Vec::new();
        if variant == Variant::GeoFusion && ((t + 1) % cfg.solver.stage2_every == 0 || t + 1 == n) {
            let start = Instant::now();
            // tentative tracks stay out of the contact graph until they pass
            // the false-positive test
            let confirmed: Vec<TrackedObject> = tracks
                .iter()
                .filter(|o| false_positive_score(o).is_ok_and(|f| f <= cfg.assoc.eps_fp))
                .cloned()
                .collect();
            relations = infer_relations(&placements(&confirmed), &ds.scene.table, &ds.registry, &cfg.relations)?;
            timings.relations_ms = ms(start);
            let start = Instant::now();
            let (refined, report) = refine_with_contacts(&placements(&tracks), &relations, &ds.scene.table, &ds.registry, &cfg.solver)?;
            if let Some(r) = report {
                cost = Some(r.final_cost);
            }
            published = refined;
            timings.stage2_ms = ms(start);
        }

        let objects: Vec<MapObject> = tracks
            .iter()
            .map(|o| {
                let f_j = false_positive_score(o).unwrap_or(1.0);
                MapObject {
                    id: o.id,
                    class_id: o.class_id,
                    pose: published[&o.id],
                    f_j,
                    n_meas: o.n_meas(),
                    score: 1.0 - f_j,
                }
            })
            .collect();
        let pub_places: Vec<Placement> = objects
            .iter()
            .map(|o| Placement {
                id: o.id,
                class_id: o.class_id,
                pose: o.pose,
            })
            .collect();
        let relations = relation_records(&relations, &pub_places, &ds.scene.table, &ds.registry)?;
        maps.push(KeyframeMap {
            t,
            camera: robots[t],
            objects,
            relations,
            cost,
            timings,
        });
    }
    Ok(PipelineOutput {
        variant,
        maps,
        trace,
        tracks,
        stage1_reports,
    })
}

/// CSV timing log, one row per keyframe.
pub fn timings_csv(maps: &[KeyframeMap]) -> String {
    let mut s = String::from("frame,assoc_ms,stage1_ms,relations_ms,stage2_ms\n");
    for m in maps {
        let t = &m.timings;
        s.push_str(&format!(
            "{},{:.3},{:.3},{:.3},{:.3}\n",
            m.t, t.assoc_ms, t.stage1_ms, t.relations_ms, t.stage2_ms
        ));
    }
    s
}
