//! JSONL trajectory files: one header line, then one line per frame.
//!
//! ```text
//! {"fps":30,"segment_len":77,"seed":7}
//! {"t":0,"x":1.2500000000000000,"y":-3.0000000000000000,"yaw":0.78539816339744828,"fov":0.91926285802915379}
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Trajectory, TrajectoryError, TrajectoryFrame, FPS};
use crate::geometry::CameraPose;
use crate::json;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryHeader {
    pub fps: u32,
    pub segment_len: usize,
    pub seed: Option<u64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameLine {
    t: u64,
    x: f64,
    y: f64,
    yaw: f64,
    fov: f64,
}

impl Trajectory {
    pub fn header(&self) -> TrajectoryHeader {
        TrajectoryHeader {
            fps: FPS,
            segment_len: self.segment_len,
            seed: self.seed,
        }
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<(), TrajectoryError> {
        json::to_writer(&mut w, &self.header()).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
        for f in &self.frames {
            let line = FrameLine {
                t: f.t,
                x: f.pose.x(),
                y: f.pose.y(),
                yaw: f.pose.yaw(),
                fov: f.pose.fov(),
            };
            json::to_writer(&mut w, &line).map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self, TrajectoryError> {
        let mut lines = r.lines().enumerate();
        let header: TrajectoryHeader = match lines.next() {
            Some((_, line)) => {
                serde_json::from_str(&line?).map_err(|e| TrajectoryError::Parse {
                    line: 1,
                    message: format!("header: {e}"),
                })?
            }
            None => {
                return Err(TrajectoryError::Parse {
                    line: 1,
                    message: "missing header".into(),
                })
            }
        };
        if header.fps != FPS {
            return Err(TrajectoryError::Parse {
                line: 1,
                message: format!("unsupported fps {}", header.fps),
            });
        }
        let mut frames = Vec::new();
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |message: String| TrajectoryError::Parse {
                line: i + 1,
                message,
            };
            let rec: FrameLine =
                serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
            let pose = CameraPose::new(rec.x, rec.y, rec.yaw, rec.fov)
                .map_err(|e| parse_err(e.to_string()))?;
            frames.push(TrajectoryFrame { t: rec.t, pose });
        }
        Trajectory::new(frames, header.segment_len, header.seed)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TrajectoryError> {
        self.write_jsonl(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TrajectoryError> {
        Self::read_jsonl(BufReader::new(File::open(path)?))
    }
}
