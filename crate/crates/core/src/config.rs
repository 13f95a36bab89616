//! Session configuration: defaults, a plain `key=value` file, and overrides.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde_json::{json, Value};

use crate::actions::ActionSpec;
use crate::apf::{TowerKind, TowerSpec};
use crate::error::{Error, Result};
use crate::scalars::{fmt_q, parse_q, ScalarRing, Q};
use crate::series::RingDescriptor;

/// Environment variable naming the config file.
pub const CONFIG_ENV: &str = "ROBBA_LAB_CONFIG";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Ab,
    Berger,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ab" => Ok(Preset::Ab),
            "berger" => Ok(Preset::Berger),
            _ => Err(Error::Usage(format!("unknown preset {s:?} (expected ab or berger)"))),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Ab => "ab",
            Preset::Berger => "berger",
        })
    }
}

pub fn parse_tower(s: &str) -> Result<TowerKind> {
    match s {
        "cyclotomic" => Ok(TowerKind::Cyclotomic),
        "lubin-tate" | "lubin_tate" => Ok(TowerKind::LubinTate),
        _ => Err(Error::Usage(format!("unknown tower {s:?} (expected cyclotomic or lubin-tate)"))),
    }
}

/// Partial settings from one source.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigOverrides {
    pub p: Option<u64>,
    pub h: Option<u32>,
    pub n: Option<u32>,
    pub tvars: Option<usize>,
    pub cap: Option<i64>,
    pub preset: Option<Preset>,
    pub tower: Option<TowerKind>,
    pub levels: Option<usize>,
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub r: Option<Q>,
    pub s: Option<Q>,
    pub c: Option<Q>,
    pub out: Option<PathBuf>,
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Usage(format!("bad value {v:?} for {key}")))
}

impl ConfigOverrides {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut o = ConfigOverrides::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Usage(format!("config line {}: expected key=value", i + 1)))?;
            o.set(k.trim(), v.trim())?;
        }
        Ok(o)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "p" => self.p = Some(num(key, v)?),
            "h" => self.h = Some(num(key, v)?),
            "N" | "n" => self.n = Some(num(key, v)?),
            "tvars" => self.tvars = Some(num(key, v)?),
            "cap" => self.cap = Some(num(key, v)?),
            "preset" => self.preset = Some(v.parse()?),
            "tower" => self.tower = Some(parse_tower(v)?),
            "levels" | "J" => self.levels = Some(num(key, v)?),
            "seed" => self.seed = Some(num(key, v)?),
            "samples" => self.samples = Some(num(key, v)?),
            "r" => self.r = Some(parse_q(v)?),
            "s" => self.s = Some(parse_q(v)?),
            "c" => self.c = Some(parse_q(v)?),
            "out" => self.out = Some(PathBuf::from(v)),
            _ => return Err(Error::Usage(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Fields of `o` win over fields of `self`.
    pub fn overlay(&self, o: &ConfigOverrides) -> ConfigOverrides {
        ConfigOverrides {
            p: o.p.or(self.p),
            h: o.h.or(self.h),
            n: o.n.or(self.n),
            tvars: o.tvars.or(self.tvars),
            cap: o.cap.or(self.cap),
            preset: o.preset.or(self.preset),
            tower: o.tower.or(self.tower),
            levels: o.levels.or(self.levels),
            seed: o.seed.or(self.seed),
            samples: o.samples.or(self.samples),
            r: o.r.or(self.r),
            s: o.s.or(self.s),
            c: o.c.or(self.c),
            out: o.out.clone().or_else(|| self.out.clone()),
        }
    }
}

/// Validated settings for one run.
#[derive(Clone, Debug, PartialEq)]
pub struct SessionConfig {
    pub p: u64,
    pub h: u32,
    pub n: u32,
    pub tvars: usize,
    pub cap: i64,
    pub preset: Preset,
    pub tower: TowerKind,
    pub levels: usize,
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub r: Q,
    pub s: Q,
    pub c: Q,
    pub out: Option<PathBuf>,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            p: 2,
            h: 1,
            n: 4,
            tvars: 1,
            cap: 16,
            preset: Preset::Ab,
            tower: TowerKind::Cyclotomic,
            levels: 3,
            seed: None,
            samples: None,
            r: Q::new(1, 8),
            s: Q::new(1, 4),
            c: Q::new(1, 16),
            out: None,
        }
    }
}

impl SessionConfig {
    pub fn resolve(o: &ConfigOverrides) -> Result<Self> {
        let d = SessionConfig::default();
        let cfg = SessionConfig {
            p: o.p.unwrap_or(d.p),
            h: o.h.unwrap_or(d.h),
            n: o.n.unwrap_or(d.n),
            tvars: o.tvars.unwrap_or(d.tvars),
            cap: o.cap.unwrap_or(d.cap),
            preset: o.preset.unwrap_or(d.preset),
            tower: o.tower.unwrap_or(d.tower),
            levels: o.levels.unwrap_or(d.levels),
            seed: o.seed,
            samples: o.samples,
            r: o.r.unwrap_or(d.r),
            s: o.s.unwrap_or(d.s),
            c: o.c.unwrap_or(d.c),
            out: o.out.clone(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        ScalarRing::new(self.p, self.h, self.n)?;
        if self.cap < 1 {
            return Err(Error::Parameter("cap must be positive".into()));
        }
        if self.tvars > 3 {
            return Err(Error::Parameter("at most 3 T variables".into()));
        }
        for (name, v) in [("r", self.r), ("s", self.s), ("c", self.c)] {
            if v <= Q::from_integer(0) {
                return Err(Error::Parameter(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    pub fn scalars(&self) -> Result<ScalarRing> {
        ScalarRing::new(self.p, self.h, self.n)
    }

    /// Ring of the configured action preset.
    pub fn ring(&self) -> Result<RingDescriptor> {
        Ok(self.action()?.ring)
    }

    pub fn action(&self) -> Result<ActionSpec> {
        match self.preset {
            Preset::Ab => ActionSpec::ab(self.scalars()?, self.tvars, self.cap),
            Preset::Berger => ActionSpec::berger(self.scalars()?, self.cap),
        }
    }

    /// `h` applies to the Lubin-Tate tower only.
    pub fn tower_spec(&self) -> Result<TowerSpec> {
        let h = match self.tower {
            TowerKind::Cyclotomic => 1,
            TowerKind::LubinTate => self.h,
        };
        TowerSpec::new(self.tower, self.p, h, self.levels, self.n)
    }

    pub fn require_seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| Error::Usage("suite runs need --seed".into()))
    }

    /// Echo for reports; the output path is left out so that reports do not
    /// depend on where they are written.
    pub fn to_json(&self) -> Value {
        json!({
            "p": self.p, "h": self.h, "N": self.n, "tvars": self.tvars, "cap": self.cap,
            "preset": self.preset.to_string(), "tower": self.tower.to_string(), "levels": self.levels,
            "seed": self.seed, "samples": self.samples,
            "r": fmt_q(&self.r), "s": fmt_q(&self.s), "c": fmt_q(&self.c),
        })
    }
}
