use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use robba_lab::actions::{lubin_tate_series, GroupElement};
use robba_lab::apf::{ramification_data, strict_apf_constant, Tower};
use robba_lab::config::{parse_tower, ConfigOverrides, Preset, SessionConfig, CONFIG_ENV};
use robba_lab::descent::{
    newton_idempotent, phi_decompose, phi_inverse_basis, phi_reconstruct, splitting_norm_check, ProjectorMatrix,
};
use robba_lab::scalars::{fmt_q, parse_q, PadicScalar, ScalarRing};
use robba_lab::series::{DaggerSeries, RingDescriptor};
use robba_lab::slopes::{
    default_radii, degree, etale_witness, polygon_of_standard_sum, pure_standard, standard_sum_precision,
};
use robba_lab::status::Status;
use robba_lab::suite::{run_suite, SUITES};
use robba_lab::witt::{embed_robba, isometry_check, witt_arith, witt_norm, WittOp};
use robba_lab::{Error, Result};

#[derive(Parser)]
#[command(name = "robba-lab", version, about = "Finite-precision checks for multivariate Robba rings and APF towers")]
struct Cli {
    #[command(flatten)]
    global: GlobalFlags,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalFlags {
    #[arg(long, global = true)]
    p: Option<u64>,
    #[arg(long, global = true)]
    h: Option<u32>,
    /// Working precision: scalars live mod p^N.
    #[arg(long = "N", global = true)]
    n: Option<u32>,
    /// Number of T variables.
    #[arg(long, global = true)]
    tvars: Option<usize>,
    /// Weighted-degree cap for truncated expansions.
    #[arg(long, global = true)]
    cap: Option<i64>,
    #[arg(long, global = true, value_enum)]
    preset: Option<PresetArg>,
    #[arg(long, global = true, value_parser = ["cyclotomic", "lubin-tate"])]
    tower: Option<String>,
    /// Top tower level J.
    #[arg(long, global = true)]
    levels: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    samples: Option<usize>,
    #[arg(long, global = true)]
    r: Option<String>,
    #[arg(long, global = true)]
    s: Option<String>,
    /// Threshold constant for margin checks.
    #[arg(long, global = true)]
    c: Option<String>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Ab,
    Berger,
}

#[derive(Clone, Copy, ValueEnum)]
enum OpArg {
    Add,
    Mul,
}

#[derive(Subcommand)]
enum Command {
    /// Gauss norm of a series at radius r.
    Norm {
        #[arg(long)]
        series: String,
    },
    /// Frobenius image with the congruence and reality checks.
    Frob {
        #[arg(long)]
        series: String,
    },
    /// Action of a group element: `--a` unit and `--b` translations (ab), or
    /// comma-separated units per factor (berger).
    Gamma {
        #[arg(long)]
        series: String,
        #[arg(long, default_value = "1")]
        a: String,
        #[arg(long, default_value = "")]
        b: String,
    },
    /// Lubin-Tate endomorphism [a](T) truncated at degree cap.
    Lt {
        #[arg(long)]
        a: String,
    },
    /// Witt arithmetic on the embeddings of two series.
    Witt {
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        #[arg(long, value_enum, default_value = "add")]
        op: OpArg,
    },
    /// Idempotent lift of a matrix given as rows separated by `;`.
    Newton {
        #[arg(long)]
        matrix: String,
        #[arg(long, default_value_t = 32)]
        max_iter: usize,
    },
    /// Decomposition over the Frobenius image; component 0 is psi.
    Psi {
        #[arg(long)]
        series: String,
        #[arg(long, default_value_t = 1)]
        depth: usize,
    },
    /// Slope polygon and etale verdict of a sum of standard modules `c:d,...`.
    Slope {
        #[arg(long)]
        parts: String,
    },
    /// Ramification data of the configured tower.
    Apf,
    /// Run a seeded property suite.
    Suite {
        #[arg(long)]
        name: String,
    },
}

impl GlobalFlags {
    fn overrides(&self) -> Result<ConfigOverrides> {
        let q = |v: &Option<String>| v.as_deref().map(parse_q).transpose();
        Ok(ConfigOverrides {
            p: self.p,
            h: self.h,
            n: self.n,
            tvars: self.tvars,
            cap: self.cap,
            preset: self.preset.map(|p| match p {
                PresetArg::Ab => Preset::Ab,
                PresetArg::Berger => Preset::Berger,
            }),
            tower: self.tower.as_deref().map(parse_tower).transpose()?,
            levels: self.levels,
            seed: self.seed,
            samples: self.samples,
            r: q(&self.r)?,
            s: q(&self.s)?,
            c: q(&self.c)?,
            out: self.out.clone(),
        })
    }
}

fn load_config(flags: &GlobalFlags) -> Result<SessionConfig> {
    let file = match std::env::var_os(CONFIG_ENV) {
        Some(path) => {
            let text = fs::read_to_string(&path)
                .map_err(|e| Error::Usage(format!("cannot read {}: {e}", PathBuf::from(&path).display())))?;
            ConfigOverrides::parse(&text)?
        }
        None => ConfigOverrides::default(),
    };
    SessionConfig::resolve(&file.overlay(&flags.overrides()?))
}

fn parse_scalar(ring: ScalarRing, s: &str) -> Result<PadicScalar> {
    let r = RingDescriptor::standard(ring, 0, 0);
    let x = DaggerSeries::parse(&r, s)?;
    if x.terms().any(|(e, _)| e[0] != 0) {
        return Err(Error::Usage(format!("{s:?} is not a scalar")));
    }
    Ok(x.constant_coeff())
}

fn parse_int(s: &str) -> Result<i128> {
    s.trim().parse().map_err(|_| Error::Usage(format!("not an integer: {s:?}")))
}

fn list(s: &str) -> impl Iterator<Item = &str> {
    s.split(',').map(str::trim).filter(|x| !x.is_empty())
}

fn status_json(ok: bool) -> Value {
    json!(Status::from_bool(ok))
}

/// Runs a command; the flag reports whether any check failed.
fn execute(cmd: &Command, cfg: &SessionConfig) -> Result<(Value, bool)> {
    let output = match cmd {
        Command::Norm { series } => {
            let x = DaggerSeries::parse(&cfg.ring()?, series)?;
            let g = x.gauss_norm(cfg.r)?;
            (json!({ "valuation": g.value, "certified": g.certified }), false)
        }
        Command::Frob { series } => {
            let spec = cfg.action()?;
            let x = DaggerSeries::parse(&spec.ring, series)?;
            let phi = spec.apply_phi(&x)?;
            let cong = spec.frobenius_congruence_check(&x)?;
            let real = spec.reality_check_bound(&x, cfg.r, cfg.c)?;
            let failed = !cong || real.status == Status::Fail;
            let v = json!({ "input": x.to_string(), "phi": phi.to_json(), "congruence": status_json(cong),
                            "reality": real, "r": fmt_q(&cfg.r) });
            (v, failed)
        }
        Command::Gamma { series, a, b } => {
            let spec = cfg.action()?;
            let x = DaggerSeries::parse(&spec.ring, series)?;
            let g = match cfg.preset {
                Preset::Ab => spec.ab_element(parse_int(a)?, list(b).map(parse_int).collect::<Result<_>>()?)?,
                Preset::Berger => {
                    let ring = spec.ring.scalars.with_precision(spec.unit_precision())?;
                    let mut units = vec![PadicScalar::one(ring); spec.ring.scalars.h as usize];
                    for (slot, u) in units.iter_mut().zip(list(a)) {
                        *slot = parse_scalar(ring, u)?;
                    }
                    if units.iter().any(|u| !u.is_unit()) {
                        return Err(Error::Parameter("Lubin-Tate factors must be units".into()));
                    }
                    GroupElement::Berger { units }
                }
            };
            let y = spec.apply(&g, &x)?;
            (json!({ "gamma": g.to_string(), "input": x.to_string(), "image": y.to_json() }), false)
        }
        Command::Lt { a } => {
            let a = parse_scalar(cfg.scalars()?, a)?;
            let s = lubin_tate_series(&a, cfg.cap as usize)?;
            let coeffs: Vec<String> = (0..=cfg.cap).map(|i| s.coeff(&[i]).to_signed().to_string()).collect();
            (json!({ "a": a.to_string(), "cap": cfg.cap, "coefficients": coeffs, "series": s.to_string() }), false)
        }
        Command::Witt { a, b, op } => {
            let ring = cfg.ring()?;
            let (x, y) = (DaggerSeries::parse(&ring, a)?, DaggerSeries::parse(&ring, b)?);
            let (wx, wy) = (embed_robba(&x)?, embed_robba(&y)?);
            let op = match op {
                OpArg::Add => WittOp::Add,
                OpArg::Mul => WittOp::Mul,
            };
            let w = witt_arith(&wx, &wy, op)?;
            let iso = isometry_check(&x, cfg.r)?;
            let v = json!({ "a": wx.to_json(), "b": wy.to_json(), "result": w.to_json(),
                            "norm": witt_norm(&w, cfg.r)?, "isometry": iso });
            (v, iso.status == Status::Fail)
        }
        Command::Newton { matrix, max_iter } => {
            let ring = RingDescriptor::standard(cfg.scalars()?, cfg.tvars, 0);
            let rows: Vec<&str> = matrix.split(';').collect();
            let d = rows.len();
            let mut entries = Vec::with_capacity(d * d);
            for row in &rows {
                let cells: Vec<&str> = row.split(',').collect();
                if cells.len() != d {
                    return Err(Error::Usage("matrix must be square".into()));
                }
                for c in cells {
                    entries.push(DaggerSeries::parse(&ring, c)?);
                }
            }
            let v = ProjectorMatrix::new(d, entries)?;
            let res = newton_idempotent(&v, cfg.r, *max_iter, cfg.cap)?;
            let idem = res.w.mul(&res.w).cap(cfg.cap).sub(&res.w).is_zero();
            (json!({ "W": res.w.to_json(), "log": res.log_json(), "idempotent": idem }), !idem)
        }
        Command::Psi { series, depth } => {
            let spec = cfg.action()?;
            let x = DaggerSeries::parse(&spec.ring, series)?;
            let basis = phi_inverse_basis(&spec)?;
            let comps = phi_decompose(&spec, &x)?;
            let back = phi_reconstruct(&spec, &comps)?;
            let ok = back.agrees_with(&x);
            let parts: Vec<Value> = basis
                .iter()
                .zip(&comps)
                .map(|(b, c)| json!({ "basis": b.element.to_string(), "component": c.to_string() }))
                .collect();
            let split = splitting_norm_check(&spec, &x, *depth, cfg.r)?;
            let failed = !ok || split.status == Status::Fail;
            (json!({ "psi": comps[0].to_json(), "components": parts, "reconstructs": status_json(ok),
                     "splitting": split }), failed)
        }
        Command::Slope { parts } => {
            let ring = cfg.ring()?;
            let mut pairs = Vec::new();
            for part in list(parts) {
                let (c, d) = part.split_once(':').ok_or_else(|| Error::Usage(format!("expected c:d, got {part:?}")))?;
                let d: usize = d.trim().parse().map_err(|_| Error::Usage(format!("bad rank in {part:?}")))?;
                pairs.push((parse_int(c)? as i64, d));
            }
            if pairs.is_empty() {
                return Err(Error::Usage("no parts given".into()));
            }
            let n = ring.precision().max(standard_sum_precision(&pairs));
            let ring = ring.with_precision(n)?;
            let mut m = pure_standard(&ring, pairs[0].0, pairs[0].1)?;
            for &(c, d) in &pairs[1..] {
                m = m.direct_sum(&pure_standard(&ring, c, d)?)?;
            }
            let poly = polygon_of_standard_sum(&pairs)?;
            let deg = degree(&m)?;
            let w = etale_witness(&m, &default_radii(), cfg.cap)?;
            (json!({ "degree": deg, "polygon": poly, "etale": w.to_json(), "N": n }), false)
        }
        Command::Apf => {
            let tower = Tower::new(cfg.tower_spec()?)?;
            let data = ramification_data(&tower)?;
            let c = strict_apf_constant(tower.spec(), &data, tower.spec().max_level)?;
            (json!({ "ramification": data.to_json(), "c": c.to_json() }), false)
        }
        Command::Suite { name } => {
            if !SUITES.iter().any(|(n, _)| n == name) {
                let names: Vec<&str> = SUITES.iter().map(|(n, _)| *n).collect();
                return Err(Error::Usage(format!("unknown suite {name:?}; choose one of {}", names.join(", "))));
            }
            let report = run_suite(name, cfg)?;
            return Ok((report.to_json(), report.has_failures()));
        }
    };
    Ok(output)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Usage(_) | Error::Parameter(_) => 2,
        Error::Integrity(_) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = || -> Result<bool> {
        let cfg = load_config(&cli.global)?;
        let (value, failed) = execute(&cli.command, &cfg)?;
        let mut text = serde_json::to_string_pretty(&value).expect("json values serialize");
        text.push('\n');
        match &cfg.out {
            Some(path) => fs::write(path, text)
                .map_err(|e| Error::Usage(format!("cannot write {}: {e}", path.display())))?,
            None => print!("{text}"),
        }
        Ok(failed)
    };
    match run() {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
