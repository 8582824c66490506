//! Steering sessions: the retrieve → render → append loop, one step per
//! user-chosen pose.
//!
//! Everything here is synchronous and deterministic; the HTTP layer only
//! serializes access. Each session keeps a JSONL step log from which
//! [`replay`] rebuilds it exactly.

use std::path::PathBuf;

use context_memory::eval::coverage;
use context_memory::geometry::{
    default_fov, fov_overlap_heuristic, Bounds, CameraPose, GeometryError, OverlapConfig,
    OverlapVerdict, Vec2,
};
use context_memory::retrieval::{retrieve_context_detailed, RetrievalConfig, Stage};
use context_memory::store::{FrameRecord, MemoryStore};
use context_memory::world::{generate_world, Panorama, WorldModel, WorldSpec};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

/// Points along the arc of every fan polygon sent to clients.
pub const FAN_ARC_POINTS: usize = 16;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("invalid request: {}", .0.iter().map(|f| format!("{}: {}", f.field, f.message)).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<FieldError>),
    #[error("unknown session {0:?}")]
    UnknownSession(String),
    #[error("step log line {line}: {message}")]
    Log { line: usize, message: String },
    #[error("internal: {0}")]
    Internal(String),
}

impl SessionError {
    pub fn field(field: impl Into<String>, message: impl Into<String>) -> Self {
        SessionError::Invalid(vec![FieldError {
            field: field.into(),
            message: message.into(),
        }])
    }
}

fn geometry(prefix: &str, e: GeometryError) -> SessionError {
    SessionError::field(format!("{prefix}.{}", e.field()), e.to_string())
}

/// A pose as sent by clients; the fov defaults to the standard 52.67°.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseInput {
    pub x: f64,
    pub y: f64,
    /// Radians.
    pub yaw: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fov: Option<f64>,
}

impl PoseInput {
    fn resolve(&self, prefix: &str, fallback_fov: f64) -> Result<CameraPose, SessionError> {
        CameraPose::new(self.x, self.y, self.yaw, self.fov.unwrap_or(fallback_fov))
            .map_err(|e| geometry(prefix, e))
    }
}

impl From<CameraPose> for PoseInput {
    fn from(p: CameraPose) -> Self {
        Self {
            x: p.x(),
            y: p.y(),
            yaw: p.yaw(),
            fov: Some(p.fov()),
        }
    }
}

/// Movement relative to the current pose.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoseDelta {
    /// Meters along the heading.
    pub forward: f64,
    /// Meters to the left of the heading.
    pub left: f64,
    /// Radians, counter-clockwise.
    pub yaw: f64,
}

/// The world used when a create request names none: a 100 m square with
/// four landmarks per 100 m² and eight walls.
pub fn default_world_spec() -> WorldSpec {
    WorldSpec {
        density: 4.0,
        occluder_count: 8,
        bounds: Bounds::centered(50.0),
        seed: 7,
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CreateRequest {
    /// Generate the world from this spec.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub world: Option<WorldSpec>,
    /// Load the world from a JSON file on the server.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub world_file: Option<PathBuf>,
    /// Use this world as given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub world_model: Option<WorldModel>,
    /// Starting pose; defaults to the world center facing +x.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start: Option<PoseInput>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub overlap: Option<OverlapConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub retrieval: Option<RetrievalConfig>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepRequest {
    /// Absolute target pose. Exactly one of `pose` and `delta` is required.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pose: Option<PoseInput>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<PoseDelta>,
    /// Replaces the session's retrieval config from this step on.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub retrieval: Option<RetrievalConfig>,
    /// Replaces the overlap config from this step on; the store's edges are
    /// recomputed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub overlap: Option<OverlapConfig>,
    /// Also report nearby frames that failed the overlap test.
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub include_rejected: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveConfig {
    pub overlap: OverlapConfig,
    pub retrieval: RetrievalConfig,
}

/// A history frame with the reason it was or was not picked.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameDiagnostics {
    pub id: u32,
    /// Absent for rejected frames.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage: Option<Stage>,
    pub pose: CameraPose,
    pub fan: Vec<Vec2>,
    /// Overlap test with the target as the query.
    pub verdict: OverlapVerdict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub schema_version: u32,
    pub session_id: String,
    /// 1 for the first step.
    pub step: u64,
    /// Id of the frame appended at the target pose.
    pub frame_id: u32,
    pub pose: CameraPose,
    /// The requested pose lay outside the world and was moved inside.
    pub clamped: bool,
    pub warnings: Vec<String>,
    pub target_fan: Vec<Vec2>,
    /// Context frames, ascending id.
    pub retrieved: Vec<FrameDiagnostics>,
    pub rejected: Vec<FrameDiagnostics>,
    /// Share of the target's visible landmarks seen by the context.
    pub coverage: f64,
    pub panorama: Panorama,
    pub config: EffectiveConfig,
}

impl StepResult {
    pub fn retrieved_ids(&self) -> Vec<u32> {
        self.retrieved.iter().map(|f| f.id).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldSummary {
    pub seed: u64,
    pub bounds: Bounds,
    pub landmarks: usize,
    pub occluders: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoreSummary {
    pub frames: usize,
    pub edges: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub schema_version: u32,
    pub session_id: String,
    pub step: u64,
    pub pose: CameraPose,
    pub config: EffectiveConfig,
    pub world: WorldSummary,
    pub store: StoreSummary,
    pub poses: Vec<CameraPose>,
    pub coverage_history: Vec<f64>,
}

/// One line of the step log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LogEntry {
    Create {
        schema_version: u32,
        session_id: String,
        /// The world is always inlined so the log replays on any machine.
        request: CreateRequest,
    },
    Step {
        step: u64,
        request: StepRequest,
        frame_id: u32,
        retrieved: Vec<u32>,
        coverage: f64,
    },
}

pub struct Session {
    id: String,
    world: WorldModel,
    store: MemoryStore,
    cfg: EffectiveConfig,
    pose: CameraPose,
    steps: u64,
    coverage_history: Vec<f64>,
    log: Vec<LogEntry>,
}

fn resolve_world(req: &CreateRequest) -> Result<WorldModel, SessionError> {
    let given = [
        req.world.is_some(),
        req.world_file.is_some(),
        req.world_model.is_some(),
    ];
    if given.iter().filter(|&&g| g).count() > 1 {
        return Err(SessionError::field(
            "world",
            "give at most one of world, world_file and world_model",
        ));
    }
    if let Some(m) = &req.world_model {
        m.validate()
            .map_err(|e| SessionError::field("world_model", e.to_string()))?;
        return Ok(m.clone());
    }
    if let Some(path) = &req.world_file {
        return WorldModel::load(path)
            .map_err(|e| SessionError::field("world_file", format!("{}: {e}", path.display())));
    }
    let spec = req.world.unwrap_or_else(default_world_spec);
    if !(spec.density.is_finite() && spec.density > 0.0) {
        return Err(SessionError::field(
            "world.density",
            format!("must be positive, got {}", spec.density),
        ));
    }
    spec.bounds
        .validate()
        .map_err(|e| SessionError::field("world.bounds", e.to_string()))?;
    generate_world(&spec).map_err(|e| SessionError::field("world", e.to_string()))
}

fn validate_cfg(overlap: &OverlapConfig, retrieval: &RetrievalConfig) -> Result<(), SessionError> {
    let mut errors = Vec::new();
    if let Err(e) = overlap.validate() {
        errors.push(FieldError {
            field: format!("overlap.{}", e.field()),
            message: e.to_string(),
        });
    }
    if let Err(e) = retrieval.validate() {
        errors.push(FieldError {
            field: format!("retrieval.{}", e.field().unwrap_or("config")),
            message: e.to_string(),
        });
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(SessionError::Invalid(errors))
    }
}

fn clamp_into(bounds: &Bounds, pose: CameraPose) -> (CameraPose, bool) {
    let p = pose.position();
    if bounds.contains(p) {
        return (pose, false);
    }
    let c = bounds.clamp(p);
    (
        pose.with_position(c.x, c.y)
            .expect("clamped point is finite"),
        true,
    )
}

impl Session {
    /// Builds the world and stores the first frame at the start pose.
    pub fn create(id: String, req: CreateRequest) -> Result<Self, SessionError> {
        let world = resolve_world(&req)?;
        let cfg = EffectiveConfig {
            overlap: req.overlap.unwrap_or_default(),
            retrieval: req.retrieval.unwrap_or_default(),
        };
        validate_cfg(&cfg.overlap, &cfg.retrieval)?;
        let pose = match &req.start {
            Some(p) => p.resolve("start", default_fov())?,
            None => {
                let c = world.bounds.center();
                CameraPose::at(c.x, c.y, 0.0)
            }
        };
        let (pose, _) = clamp_into(&world.bounds, pose);
        let mut store =
            MemoryStore::new(cfg.overlap).map_err(|e| SessionError::Internal(e.to_string()))?;
        let pano = world.render_panorama(&pose, &cfg.overlap);
        store
            .append_frame(FrameRecord::with_panorama(0, pose, pano))
            .map_err(|e| SessionError::Internal(e.to_string()))?;
        let logged = CreateRequest {
            world: None,
            world_file: None,
            world_model: Some(world.clone()),
            start: Some(pose.into()),
            overlap: Some(cfg.overlap),
            retrieval: Some(cfg.retrieval),
        };
        Ok(Self {
            log: vec![LogEntry::Create {
                schema_version: SCHEMA_VERSION,
                session_id: id.clone(),
                request: logged,
            }],
            id,
            world,
            store,
            cfg,
            pose,
            steps: 0,
            coverage_history: Vec::new(),
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn store(&self) -> &MemoryStore {
        &self.store
    }

    pub fn world(&self) -> &WorldModel {
        &self.world
    }

    fn target_of(&self, req: &StepRequest) -> Result<CameraPose, SessionError> {
        match (&req.pose, &req.delta) {
            (Some(p), None) => p.resolve("pose", self.pose.fov()),
            (None, Some(d)) => self
                .pose
                .advanced(d.forward, d.left, d.yaw)
                .map_err(|e| geometry("delta", e)),
            _ => Err(SessionError::field(
                "pose",
                "exactly one of pose and delta is required",
            )),
        }
    }

    /// Retrieves context for the target, renders it, and appends it.
    pub fn step(&mut self, req: StepRequest) -> Result<StepResult, SessionError> {
        let overlap = req.overlap.unwrap_or(self.cfg.overlap);
        let retrieval = req.retrieval.unwrap_or(self.cfg.retrieval);
        validate_cfg(&overlap, &retrieval)?;
        let target = self.target_of(&req)?;
        let (target, clamped) = clamp_into(&self.world.bounds, target);
        let mut warnings = Vec::new();
        if clamped {
            warnings.push(format!(
                "target outside the world; moved to ({:.3}, {:.3})",
                target.x(),
                target.y()
            ));
        }
        if overlap != self.cfg.overlap {
            self.rebuild_store(overlap)?;
        }
        self.cfg = EffectiveConfig { overlap, retrieval };

        let out = retrieve_context_detailed(&self.store, &target, &retrieval, None)
            .map_err(|e| SessionError::Internal(e.to_string()))?;
        let ids = out.ids();
        let diag = |id: u32, stage: Option<Stage>| {
            let pose = *self.store.pose(id).expect("retrieved id stored");
            FrameDiagnostics {
                id,
                stage,
                pose,
                fan: pose.fan_polygon(overlap.d_max, FAN_ARC_POINTS),
                verdict: fov_overlap_heuristic(&target, &pose, &overlap),
            }
        };
        let retrieved: Vec<FrameDiagnostics> = out
            .context
            .iter()
            .map(|s| diag(s.id, Some(s.stage)))
            .collect();
        let rejected = if req.include_rejected {
            let reach = overlap.max_separation();
            self.store
                .records()
                .iter()
                .filter(|r| r.pose.position().distance(target.position()) <= reach)
                .filter(|r| !ids.contains(&r.frame_id))
                .map(|r| diag(r.frame_id, None))
                .filter(|d| !d.verdict.overlaps)
                .collect()
        } else {
            Vec::new()
        };
        let cov = coverage(&self.world, &target, &ids, &self.store, &overlap);
        let panorama = self.world.render_panorama(&target, &overlap);
        let time_index = self.store.len() as u64;
        let frame_id = self
            .store
            .append_frame(FrameRecord::with_panorama(
                time_index,
                target,
                panorama.clone(),
            ))
            .map_err(|e| SessionError::Internal(e.to_string()))?;
        self.pose = target;
        self.steps += 1;
        self.coverage_history.push(cov);
        self.log.push(LogEntry::Step {
            step: self.steps,
            request: req,
            frame_id,
            retrieved: ids,
            coverage: cov,
        });
        Ok(StepResult {
            schema_version: SCHEMA_VERSION,
            session_id: self.id.clone(),
            step: self.steps,
            frame_id,
            pose: target,
            clamped,
            warnings,
            target_fan: target.fan_polygon(overlap.d_max, FAN_ARC_POINTS),
            retrieved,
            rejected,
            coverage: cov,
            panorama,
            config: self.cfg,
        })
    }

    fn rebuild_store(&mut self, overlap: OverlapConfig) -> Result<(), SessionError> {
        let mut store =
            MemoryStore::new(overlap).map_err(|e| SessionError::Internal(e.to_string()))?;
        for r in self.store.records() {
            store
                .append_frame(r.clone())
                .map_err(|e| SessionError::Internal(e.to_string()))?;
        }
        self.store = store;
        Ok(())
    }

    pub fn state(&self) -> SessionState {
        SessionState {
            schema_version: SCHEMA_VERSION,
            session_id: self.id.clone(),
            step: self.steps,
            pose: self.pose,
            config: self.cfg,
            world: WorldSummary {
                seed: self.world.seed,
                bounds: self.world.bounds,
                landmarks: self.world.landmarks.len(),
                occluders: self.world.occluders.len(),
            },
            store: StoreSummary {
                frames: self.store.len(),
                edges: self.store.edge_count(),
            },
            poses: self.store.records().iter().map(|r| r.pose).collect(),
            coverage_history: self.coverage_history.clone(),
        }
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    /// The step log as JSONL, floats at 17 significant digits.
    pub fn log_jsonl(&self) -> String {
        let mut out = Vec::new();
        for entry in &self.log {
            context_memory::json::to_writer(&mut out, entry).expect("log entries serialize");
            out.push(b'\n');
        }
        String::from_utf8(out).expect("JSON is UTF-8")
    }
}

/// A step whose replayed outcome differs from the logged one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplayMismatch {
    pub step: u64,
    pub logged: Vec<u32>,
    pub replayed: Vec<u32>,
}

pub struct Replay {
    pub session: Session,
    pub results: Vec<StepResult>,
    pub mismatches: Vec<ReplayMismatch>,
}

/// Rebuilds a session from its step log, re-running every step and
/// comparing retrieved ids, frame ids and coverage with the logged ones.
pub fn replay(jsonl: &str) -> Result<Replay, SessionError> {
    let mut session: Option<Session> = None;
    let mut results = Vec::new();
    let mut mismatches = Vec::new();
    for (i, line) in jsonl.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| SessionError::Log {
            line: i + 1,
            message,
        };
        let entry: LogEntry = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        match (entry, session.as_mut()) {
            (
                LogEntry::Create {
                    schema_version,
                    session_id,
                    request,
                },
                None,
            ) => {
                if schema_version != SCHEMA_VERSION {
                    return Err(err(format!("unsupported schema version {schema_version}")));
                }
                session = Some(Session::create(session_id, request)?);
            }
            (LogEntry::Create { .. }, Some(_)) => return Err(err("second create entry".into())),
            (LogEntry::Step { .. }, None) => return Err(err("step before create".into())),
            (
                LogEntry::Step {
                    step,
                    request,
                    frame_id,
                    retrieved,
                    coverage,
                },
                Some(s),
            ) => {
                let r = s.step(request)?;
                if r.step != step {
                    return Err(err(format!("expected step {}, log says {step}", r.step)));
                }
                let ids = r.retrieved_ids();
                if ids != retrieved
                    || r.frame_id != frame_id
                    || r.coverage.to_bits() != coverage.to_bits()
                {
                    mismatches.push(ReplayMismatch {
                        step,
                        logged: retrieved,
                        replayed: ids,
                    });
                }
                results.push(r);
            }
        }
    }
    let session = session.ok_or_else(|| SessionError::Log {
        line: 1,
        message: "empty log".into(),
    })?;
    Ok(Replay {
        session,
        results,
        mismatches,
    })
}
