//! Text snapshots of a configuration:
//!
//! ```text
//! rcgrid v1 L=3 p=0.35 q=1 bc=free seed=7
//! c5 o2 c17
//! ```
//!
//! The second line lists maximal runs of closed (`c`) and open (`o`) edges
//! in edge-id order.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::lattice::{BondConfig, BoxGeom};
use crate::model::{Boundary, RcParams};

pub const MAGIC: &str = "rcgrid v1";

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub params: RcParams,
    pub seed: u64,
    pub config: BondConfig,
}

impl Snapshot {
    pub fn new(params: RcParams, seed: u64, config: BondConfig) -> Self {
        Snapshot { params, seed, config }
    }

    pub fn to_text(&self) -> String {
        let geom = self.config.geom();
        let mut out = format!(
            "{MAGIC} L={} p={} q={} bc={} seed={}\n",
            geom.half_width(),
            self.params.p,
            self.params.q,
            self.params.bc,
            self.seed
        );
        let states = self.config.states();
        let mut runs = Vec::new();
        let mut i = 0;
        while i < states.len() {
            let s = states[i];
            let start = i;
            while i < states.len() && states[i] == s {
                i += 1;
            }
            runs.push((s, i - start));
        }
        for (k, (s, len)) in runs.iter().enumerate() {
            if k > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{}{}", if *s { 'o' } else { 'c' }, len);
        }
        out.push('\n');
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty snapshot".into()))?;
        let rest =
            header.strip_prefix(MAGIC).ok_or_else(|| Error::Parse(format!("snapshot must start with `{MAGIC}`")))?;
        let (mut l, mut p, mut q, mut bc, mut seed) = (None, None, None, None, None);
        for field in rest.split_whitespace() {
            let (k, v) = field.split_once('=').ok_or_else(|| Error::Parse(format!("bad header field `{field}`")))?;
            let bad = |_| Error::Parse(format!("bad value in `{field}`"));
            match k {
                "L" => l = Some(v.parse::<u32>().map_err(|e| bad(e.to_string()))?),
                "p" => p = Some(v.parse::<f64>().map_err(|e| bad(e.to_string()))?),
                "q" => q = Some(v.parse::<f64>().map_err(|e| bad(e.to_string()))?),
                "bc" => bc = Some(v.parse::<Boundary>()?),
                "seed" => seed = Some(v.parse::<u64>().map_err(|e| bad(e.to_string()))?),
                _ => return Err(Error::Parse(format!("unknown header field `{k}`"))),
            }
        }
        let missing = |name: &str| Error::Parse(format!("header lacks `{name}`"));
        let geom = BoxGeom::new(l.ok_or_else(|| missing("L"))?)?;
        let params = RcParams::new(
            p.ok_or_else(|| missing("p"))?,
            q.ok_or_else(|| missing("q"))?,
            bc.ok_or_else(|| missing("bc"))?,
        )?;
        let seed = seed.ok_or_else(|| missing("seed"))?;
        let body = lines.next().unwrap_or("");
        if lines.any(|l| !l.trim().is_empty()) {
            return Err(Error::Parse("trailing content after the run-length line".into()));
        }
        let mut states = Vec::with_capacity(geom.edge_count());
        for tok in body.split_whitespace() {
            let (kind, count) = tok.split_at(1);
            let open = match kind {
                "o" => true,
                "c" => false,
                _ => return Err(Error::Parse(format!("bad run `{tok}`"))),
            };
            let n: usize = count.parse().map_err(|_| Error::Parse(format!("bad run `{tok}`")))?;
            if n == 0 || states.len() + n > geom.edge_count() {
                return Err(Error::Parse(format!("run `{tok}` overflows {} edges", geom.edge_count())));
            }
            states.extend(std::iter::repeat_n(open, n));
        }
        if states.len() != geom.edge_count() {
            return Err(Error::Parse(format!("runs cover {} of {} edges", states.len(), geom.edge_count())));
        }
        Ok(Snapshot { params, seed, config: BondConfig::from_states(geom, states)? })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Snapshot::parse(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}
