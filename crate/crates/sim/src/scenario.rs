//! Plain-text scenario files: one `key = value` pair per line, `#` comments.
//!
//! ```text
//! node_density = 25
//! width = 1.0
//! height = 1.0
//! num_holes = 1
//! hole0 = 8 9 16 13
//! anchor_translation = 1.5 -4.0 0.0
//! anchor_rotation_z = 0.3
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::anchor::{AnchorPose, AnchorSpec};
use crate::cloth::{ClothSpec, HoleSpec};
use crate::error::{Result, SimError};

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub cloth: ClothSpec,
    pub anchor: AnchorSpec,
}

impl Scenario {
    pub fn to_text(&self) -> String {
        let c = &self.cloth;
        let mut s = String::new();
        let _ = writeln!(s, "node_density = {}", c.node_density);
        let _ = writeln!(s, "width = {:?}", c.width);
        let _ = writeln!(s, "height = {:?}", c.height);
        let _ = writeln!(s, "num_holes = {}", c.num_holes);
        for (k, h) in c.holes.iter().enumerate() {
            let _ = writeln!(s, "hole{k} = {} {} {} {}", h.x0, h.y0, h.x1, h.y1);
        }
        let t = self.anchor.pose.translation;
        let _ = writeln!(s, "anchor_translation = {:?} {:?} {:?}", t[0], t[1], t[2]);
        let _ = writeln!(s, "anchor_rotation_z = {:?}", self.anchor.pose.rotation_z);
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut kv: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| SimError::Scenario {
                line: idx + 1,
                msg: format!("expected 'key = value', got '{line}'"),
            })?;
            kv.insert(k.trim().to_string(), (idx + 1, v.trim().to_string()));
        }
        let get = |key: &str| -> Result<&(usize, String)> {
            kv.get(key).ok_or_else(|| SimError::Scenario {
                line: 0,
                msg: format!("missing key '{key}'"),
            })
        };
        fn nums<T: std::str::FromStr>(entry: &(usize, String), want: usize) -> Result<Vec<T>> {
            let vals: std::result::Result<Vec<T>, _> =
                entry.1.split_whitespace().map(str::parse).collect();
            match vals {
                Ok(v) if v.len() == want => Ok(v),
                _ => Err(SimError::Scenario {
                    line: entry.0,
                    msg: format!("expected {want} number(s), got '{}'", entry.1),
                }),
            }
        }
        let num_holes = nums::<usize>(get("num_holes")?, 1)?[0];
        let holes = (0..num_holes)
            .map(|k| {
                let v = nums::<usize>(get(&format!("hole{k}"))?, 4)?;
                Ok(HoleSpec {
                    x0: v[0],
                    y0: v[1],
                    x1: v[2],
                    y1: v[3],
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let cloth = ClothSpec {
            node_density: nums::<usize>(get("node_density")?, 1)?[0],
            width: nums::<f64>(get("width")?, 1)?[0],
            height: nums::<f64>(get("height")?, 1)?[0],
            num_holes,
            holes,
        };
        cloth.validate()?;
        let t = nums::<f64>(get("anchor_translation")?, 3)?;
        let pose = AnchorPose {
            translation: [t[0], t[1], t[2]],
            rotation_z: nums::<f64>(get("anchor_rotation_z")?, 1)?[0],
        };
        Ok(Self {
            cloth,
            anchor: AnchorSpec::new(pose),
        })
    }
}
