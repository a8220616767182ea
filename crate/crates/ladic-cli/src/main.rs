//! Command-line frontend: parses a single subcommand, dispatches to the
//! library, and emits one deterministic report on standard output.
//!
//! Exit codes: 0 success (including UNIPOTENT and INCONCLUSIVE verdicts),
//! 2 parse or validation failure, 3 precision exhaustion, 10 an EXCLUDED
//! verdict.

use clap::{Parser, Subcommand, ValueEnum};
use ladic::convergent::{estimate_r0, LowerBound, RepSpec};
use ladic::freealg::{AlgebraElement, AlgebraSignature};
use ladic::galois::{canonical_path, PeriodTriple, QuasiScalar, TorsorCocycle};
use ladic::gate::{threshold, verdict, Classification, CyclotomicSpec};
use ladic::groupoid::verify_hopf_axioms;
use ladic::padic::{brute_val_qpow, cbound, val_qpow};
use ladic::Error;
use serde_json::json;
use std::path::PathBuf;
use std::process::ExitCode;

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "ladic", version, about = "Integral period and unipotence tables")]
struct Cli {
    /// Report format on standard output.
    #[arg(long, global = true, value_enum, default_value_t = Format::Tsv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Tsv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Congruence bound and integer threshold for a prime and a degree.
    Threshold {
        #[arg(long)]
        ell: u64,
        /// Explicit degree; mutually exclusive with --surjective.
        #[arg(long, conflicts_with = "surjective")]
        q: Option<u128>,
        /// Use a topological generator of the units as the degree.
        #[arg(long)]
        surjective: bool,
        #[arg(long, default_value_t = 6)]
        precision: u32,
    },
    /// Valuation table of q^k - 1 with running sums and the digit budget.
    Vsum {
        #[arg(long)]
        ell: u64,
        #[arg(long)]
        q: u128,
        /// Largest exponent in the table.
        #[arg(long)]
        k: u64,
    },
    /// Annihilator exponent of a filtered block given as a JSON file.
    Period {
        #[arg(long)]
        input: PathBuf,
    },
    /// Per-grade lifting diagnostics for a scalar action given as JSON.
    Eigenlift {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        grade_cap: u32,
    },
    /// Denominator exponents of the canonical fixed path of a cocycle.
    CanonicalPath {
        /// Scalar action JSON file.
        #[arg(long)]
        action: PathBuf,
        /// Cocycle as an element table; defaults to the constant path.
        #[arg(long)]
        cocycle: Option<PathBuf>,
        #[arg(long)]
        grade_cap: u32,
    },
    /// Verdict for a representation file against a degree character.
    CheckRep {
        #[arg(long)]
        rep: PathBuf,
        #[arg(long, conflicts_with = "surjective")]
        q: Option<u128>,
        #[arg(long)]
        surjective: bool,
        /// Declared puncture count; generators must number one less.
        #[arg(long)]
        punctures: Option<usize>,
    },
    /// Convergence-radius lower bound for a representation file.
    R0 {
        #[arg(long)]
        rep: PathBuf,
        /// Number of augmentation steps to track.
        #[arg(long)]
        window: u32,
    },
    /// Randomized diagram checks for the groupoid structure.
    HopfSelftest {
        #[arg(long)]
        ell: u64,
        #[arg(long, default_value_t = 5)]
        precision: u32,
        #[arg(long, default_value_t = 4)]
        max_degree: u32,
        /// Comma-separated name:grade pairs, e.g. X:1,Y:1.
        #[arg(long, default_value = "X:1,Y:1")]
        generators: String,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok((report, code)) => {
            print!("{report}");
            ExitCode::from(code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::PrecisionExhausted(_) | Error::RootOfUnity(_) => 3,
                _ => 2,
            };
            ExitCode::from(code)
        }
    }
}

fn read_file(path: &PathBuf) -> Result<String, Error> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Invalid(format!("cannot read {}: {e}", path.display())))
}

/// Metadata lines for TSV reports; JSON reports carry the same fields.
fn tsv_header(command: &str, params: &[(&str, String)]) -> String {
    let mut out = format!("# schema_version\t{SCHEMA_VERSION}\n# command\t{command}\n");
    for (k, v) in params {
        out.push_str(&format!("# {k}\t{v}\n"));
    }
    out
}

fn json_report(command: &str, params: &[(&str, String)], body: serde_json::Value) -> String {
    let mut obj = serde_json::Map::new();
    obj.insert("schema_version".into(), json!(SCHEMA_VERSION));
    obj.insert("command".into(), json!(command));
    let params: serde_json::Map<String, serde_json::Value> = params
        .iter()
        .map(|(k, v)| (k.to_string(), json!(v)))
        .collect();
    obj.insert("params".into(), serde_json::Value::Object(params));
    if let serde_json::Value::Object(m) = body {
        obj.extend(m);
    }
    let mut s = serde_json::to_string_pretty(&serde_json::Value::Object(obj))
        .expect("serializable report");
    s.push('\n');
    s
}

fn dispatch(cli: &Cli) -> Result<(String, u8), Error> {
    match &cli.command {
        Command::Threshold {
            ell,
            q,
            surjective,
            precision,
        } => {
            let spec = resolve_spec(*ell, *precision, *q, *surjective)?;
            let (bound, n) = threshold(&spec)?;
            let params = [
                ("ell", ell.to_string()),
                ("q", spec.q().to_string()),
                ("precision", precision.to_string()),
            ];
            let report = match cli.format {
                Format::Tsv => format!(
                    "{}bound\tthreshold\n{bound}\t{n}\n",
                    tsv_header("threshold", &params)
                ),
                Format::Json => json_report(
                    "threshold",
                    &params,
                    json!({"bound": bound.to_string(), "threshold": n}),
                ),
            };
            Ok((report, 0))
        }
        Command::Vsum { ell, q, k } => {
            if *k == 0 {
                return Err(Error::Invalid("exponent window must be positive".into()));
            }
            let mut rows = Vec::new();
            let mut sum = 0u64;
            for i in 1..=*k {
                let v = val_qpow(*q, i, *ell)?;
                let b = brute_val_qpow(*q, i, *ell)?;
                sum += v;
                rows.push((i, v, b, sum, cbound(*q, *ell, i)?));
            }
            let params = [
                ("ell", ell.to_string()),
                ("q", q.to_string()),
                ("k", k.to_string()),
            ];
            let report = match cli.format {
                Format::Tsv => {
                    let mut out = tsv_header("vsum", &params);
                    out.push_str("k\tval\tbrute\tsum\tcbound\n");
                    for (i, v, b, s, c) in &rows {
                        out.push_str(&format!("{i}\t{v}\t{b}\t{s}\t{c}\n"));
                    }
                    out
                }
                Format::Json => json_report(
                    "vsum",
                    &params,
                    json!({
                        "rows": rows
                            .iter()
                            .map(|(i, v, b, s, c)| json!({
                                "k": i,
                                "val": v,
                                "brute": b,
                                "sum": s,
                                "cbound": c.to_string(),
                            }))
                            .collect::<Vec<_>>(),
                    }),
                ),
            };
            Ok((report, 0))
        }
        Command::Period { input } => {
            let triple = PeriodTriple::from_json(&read_file(input)?)?;
            let e = triple.integral_period();
            let params = [("input", input.display().to_string())];
            let report = match cli.format {
                Format::Tsv => format!(
                    "{}dim\tsub_dim\texponent\n{}\t{}\t{e}\n",
                    tsv_header("period", &params),
                    triple.dim(),
                    triple.sub_dim()
                ),
                Format::Json => json_report(
                    "period",
                    &params,
                    json!({
                        "dim": triple.dim(),
                        "sub_dim": triple.sub_dim(),
                        "exponent": e.to_string(),
                    }),
                ),
            };
            Ok((report, 0))
        }
        Command::Eigenlift { input, grade_cap } => {
            let action = QuasiScalar::from_json(&read_file(input)?)?;
            let basis = action.eigenbasis(*grade_cap)?;
            let params = [
                ("input", input.display().to_string()),
                ("q", action.degree().to_string()),
                ("grade_cap", grade_cap.to_string()),
            ];
            let report = match cli.format {
                Format::Tsv => {
                    let mut out = tsv_header("eigenlift", &params);
                    out.push_str("grade\tworst_period\tcbound\tpass\n");
                    for d in &basis.per_grade {
                        out.push_str(&format!(
                            "{}\t{}\t{}\t{}\n",
                            d.grade,
                            d.worst_period,
                            d.bound,
                            if d.within_bound { "pass" } else { "fail" }
                        ));
                    }
                    out
                }
                Format::Json => json_report(
                    "eigenlift",
                    &params,
                    json!({
                        "per_grade": basis
                            .per_grade
                            .iter()
                            .map(|d| json!({
                                "grade": d.grade,
                                "worst_period": d.worst_period,
                                "cbound": d.bound.to_string(),
                                "pass": d.within_bound,
                            }))
                            .collect::<Vec<_>>(),
                    }),
                ),
            };
            Ok((report, 0))
        }
        Command::CanonicalPath {
            action,
            cocycle,
            grade_cap,
        } => {
            let sigma = QuasiScalar::from_json(&read_file(action)?)?;
            let sig = sigma.signature().clone();
            let u = match cocycle {
                Some(path) => AlgebraElement::from_text(&sig, &read_file(path)?)?,
                None => AlgebraElement::one(&sig),
            };
            let c = TorsorCocycle::new(sigma, u)?;
            let cp = canonical_path(&c, *grade_cap)?;
            let params = [
                ("action", action.display().to_string()),
                (
                    "cocycle",
                    cocycle
                        .as_ref()
                        .map_or("1".into(), |p| p.display().to_string()),
                ),
                ("q", c.sigma().degree().to_string()),
                ("grade_cap", grade_cap.to_string()),
            ];
            let report = match cli.format {
                Format::Tsv => {
                    let mut out = tsv_header("canonical-path", &params);
                    out.push_str("n\tb0\n");
                    for (i, b) in cp.periods.iter().enumerate() {
                        out.push_str(&format!("{}\t{b}\n", i + 1));
                    }
                    out
                }
                Format::Json => json_report(
                    "canonical-path",
                    &params,
                    json!({"b0": cp.periods}),
                ),
            };
            Ok((report, 0))
        }
        Command::CheckRep {
            rep,
            q,
            surjective,
            punctures,
        } => {
            let r = RepSpec::from_json(&read_file(rep)?)?;
            if let Some(p) = punctures {
                if r.num_generators() + 1 != *p {
                    return Err(Error::Invalid(format!(
                        "declared {p} punctures require {} generators, file has {}",
                        p - 1,
                        r.num_generators()
                    )));
                }
            }
            let spec = resolve_spec(r.ell(), r.precision(), *q, *surjective)?;
            let v = verdict(&spec, &r)?;
            let hypothesis = format!(
                "the declared degree {} lies in the arithmetic image for the prime {}",
                spec.q(),
                r.ell()
            );
            let params = [
                ("rep", rep.display().to_string()),
                ("ell", r.ell().to_string()),
                ("precision", r.precision().to_string()),
                ("q", spec.q().to_string()),
            ];
            let report = match cli.format {
                Format::Tsv => {
                    let mut out = tsv_header("check-rep", &params);
                    out.push_str(&format!(
                        "classification\t{}\nbound\t{}\nthreshold\t{}\ntriviality_level\t{}\n",
                        v.classification.as_str(),
                        v.bound,
                        v.threshold,
                        v.triviality_level
                    ));
                    out.push_str(&format!("hypothesis\t{hypothesis}\n"));
                    for c in &v.caveats {
                        out.push_str(&format!("caveat\t{c}\n"));
                    }
                    out
                }
                Format::Json => {
                    let mut body = v.to_json_value();
                    body["hypothesis"] = json!(hypothesis);
                    json_report("check-rep", &params, body)
                }
            };
            let code = if v.classification == Classification::Excluded {
                10
            } else {
                0
            };
            Ok((report, code))
        }
        Command::R0 { rep, window } => {
            let r = RepSpec::from_json(&read_file(rep)?)?;
            let est = estimate_r0(&r, *window)?;
            let lower = match &est.r0_lower {
                LowerBound::Finite(b) => b.to_string(),
                LowerBound::Infinite => "inf".into(),
            };
            let params = [
                ("rep", rep.display().to_string()),
                ("ell", r.ell().to_string()),
                ("precision", r.precision().to_string()),
                ("window", window.to_string()),
            ];
            let report = match cli.format {
                Format::Tsv => {
                    let mut out = tsv_header("r0", &params);
                    out.push_str("s\tm_s\n");
                    for (s, m) in est.m_s.iter().enumerate() {
                        out.push_str(&format!("{}\t{m}\n", s + 1));
                    }
                    out.push_str(&format!(
                        "r0_lower\t{lower}\nunipotent_detected\t{}\nprecision_capped\t{}\n",
                        est.unipotent_detected, est.precision_capped
                    ));
                    out
                }
                Format::Json => json_report(
                    "r0",
                    &params,
                    json!({
                        "m_s": est.m_s,
                        "r0_lower": lower,
                        "unipotent_detected": est.unipotent_detected,
                        "precision_capped": est.precision_capped,
                    }),
                ),
            };
            Ok((report, 0))
        }
        Command::HopfSelftest {
            ell,
            precision,
            max_degree,
            generators,
            samples,
            seed,
        } => {
            let gens = parse_generators(generators)?;
            let pairs: Vec<(&str, u8)> =
                gens.iter().map(|(n, g)| (n.as_str(), *g)).collect();
            let sig = AlgebraSignature::new(*ell, *precision, *max_degree, &pairs)?;
            let report_data = verify_hopf_axioms(&sig, *samples, *seed);
            let params = [
                ("ell", ell.to_string()),
                ("precision", precision.to_string()),
                ("max_degree", max_degree.to_string()),
                ("generators", generators.clone()),
                ("samples", samples.to_string()),
                ("seed", seed.to_string()),
            ];
            let report = match cli.format {
                Format::Tsv => {
                    let mut out = tsv_header("hopf-selftest", &params);
                    out.push_str("diagram\tresult\tsamples\twitness\n");
                    for d in &report_data.diagrams {
                        out.push_str(&format!(
                            "{}\t{}\t{}\t{}\n",
                            d.name,
                            if d.passed { "pass" } else { "fail" },
                            d.samples,
                            d.witness
                                .as_deref()
                                .unwrap_or("-")
                                .replace('\n', " / ")
                        ));
                    }
                    out
                }
                Format::Json => json_report(
                    "hopf-selftest",
                    &params,
                    json!({
                        "diagrams": report_data
                            .diagrams
                            .iter()
                            .map(|d| json!({
                                "name": d.name,
                                "passed": d.passed,
                                "samples": d.samples,
                                "witness": d.witness,
                            }))
                            .collect::<Vec<_>>(),
                    }),
                ),
            };
            Ok((report, 0))
        }
    }
}

fn resolve_spec(
    ell: u64,
    precision: u32,
    q: Option<u128>,
    surjective: bool,
) -> Result<CyclotomicSpec, Error> {
    match (q, surjective) {
        (Some(q), false) => CyclotomicSpec::new(ell, precision, q),
        (None, true) => CyclotomicSpec::surjective(ell, precision),
        (None, false) => Err(Error::Invalid(
            "either --q or --surjective is required".into(),
        )),
        (Some(_), true) => unreachable!("clap rejects the conflict"),
    }
}

fn parse_generators(text: &str) -> Result<Vec<(String, u8)>, Error> {
    let mut out = Vec::new();
    for part in text.split(',') {
        let (name, grade) = part.split_once(':').ok_or_else(|| {
            Error::Invalid(format!("generator {part:?} is not of the form NAME:GRADE"))
        })?;
        let grade: u8 = grade
            .parse()
            .map_err(|_| Error::Invalid(format!("bad grade in {part:?}")))?;
        out.push((name.to_string(), grade));
    }
    Ok(out)
}
