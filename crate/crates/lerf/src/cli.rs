//! Command-line front end: `decide`, `separate`, `verify`, `nf`, and `bs`.
//!
//! Exit codes: 0 success/valid, 1 invalid or violation, 2 usage error,
//! 3 unknown (limits consumed). Words on the command line use the same
//! token grammar as spec files; identical invocations produce byte-identical
//! output and certificate files.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::amalgam::{
    self, build_amalgam, AmalgamGroup, Decision, Limits, SearchError,
};
use crate::certificates;
use crate::presentations::{parse_amalgam_spec, parse_word, serialize_word, Word};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_UNKNOWN: i32 = 3;

const ENGINE_VERSION: &str = concat!("lerf ", env!("CARGO_PKG_VERSION"));

#[derive(Parser, Debug)]
#[command(
    name = "lerf",
    about = "certified membership decisions in amalgamated free products",
    disable_version_flag = true
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Decide membership of an element in a finitely generated subgroup.
    Decide(QueryArgs),
    /// Emit a separation certificate for a non-member element.
    Separate(QueryArgs),
    /// Check a certificate file independently of the engine.
    Verify {
        /// Path to the certificate file.
        certificate: PathBuf,
    },
    /// Print the reduced sequence of an element.
    Nf {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        element: String,
    },
    /// Write the spec file for the Baumslag-Solitar amalgam G(m, ±m).
    Bs {
        m: u32,
        /// `+1`/`+` or `-1`/`-`.
        sign: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct QueryArgs {
    /// Amalgam description file.
    #[arg(long)]
    spec: PathBuf,
    /// Comma-separated subgroup generator words (overrides the spec file).
    #[arg(long)]
    subgroup: Option<String>,
    /// The element to test (overrides the spec file).
    #[arg(long)]
    element: Option<String>,
    /// Wall-clock limit per query, in seconds.
    #[arg(long, default_value_t = 60)]
    limit_time: u64,
    /// Cap on finite quotient orders explored.
    #[arg(long, default_value_t = 100_000)]
    limit_order: usize,
    /// Stability window for the intersection saturation.
    #[arg(long, default_value_t = 3)]
    limit_window: usize,
    /// Certificate output path.
    #[arg(long, default_value = "cert.txt")]
    out: PathBuf,
    /// Write line-oriented trace events here.
    #[arg(long)]
    trace: Option<PathBuf>,
}

/// The configuration a query runs under, resolved from flags and spec file.
pub struct RunConfig {
    pub group: AmalgamGroup,
    pub subgroup: Vec<Word>,
    pub target: Word,
    pub limits: Limits,
    pub out: PathBuf,
    pub trace: Option<PathBuf>,
}

pub fn run(args: &[String], stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let mut argv = vec!["lerf".to_string()];
    argv.extend(args.iter().cloned());
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(stderr, "{e}");
            return EXIT_USAGE;
        }
    };
    match dispatch(cli, stdout, stderr) {
        Ok(code) => code,
        Err(msg) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_INVALID
        }
    }
}

fn dispatch(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32, String> {
    match cli.cmd {
        Cmd::Decide(args) => {
            let config = resolve_query(&args)?;
            run_decide(config, false, stdout, stderr)
        }
        Cmd::Separate(args) => {
            let config = resolve_query(&args)?;
            run_decide(config, true, stdout, stderr)
        }
        Cmd::Verify { certificate } => {
            let text = std::fs::read_to_string(&certificate)
                .map_err(|e| format!("cannot read {}: {e}", certificate.display()))?;
            let cert = match certificates::decode(&text) {
                Ok(c) => c,
                Err(e) => {
                    let _ = writeln!(stdout, "INVALID {e}");
                    return Ok(EXIT_INVALID);
                }
            };
            match certificates::verify(&cert) {
                certificates::Verdict::Valid => {
                    let _ = writeln!(stdout, "VALID degree={}", cert.degree());
                    Ok(EXIT_OK)
                }
                certificates::Verdict::Invalid(reason) => {
                    let _ = writeln!(stdout, "INVALID {reason}");
                    Ok(EXIT_INVALID)
                }
            }
        }
        Cmd::Nf { spec, element } => {
            let group = load_group(&spec)?;
            let word =
                parse_word(&element, &group.combined).map_err(|e| e.to_string())?;
            let seq = group.reduce(&word).map_err(|e| e.to_string())?;
            let part = group.a.nf_to_word(&seq.amalgam_part);
            let rendered = serialize_word(&part, &group.combined);
            let _ = writeln!(
                stdout,
                "amalgam_part {}",
                if rendered.is_empty() { "1" } else { &rendered }
            );
            for (side, rep) in &seq.syllables {
                let local = group.factor(*side).nf_to_word(rep);
                let combined = group.to_combined(*side, &local);
                let _ = writeln!(
                    stdout,
                    "syllable {} {}",
                    match side {
                        amalgam::Side::A => "A",
                        amalgam::Side::B => "B",
                    },
                    serialize_word(&combined, &group.combined)
                );
            }
            Ok(EXIT_OK)
        }
        Cmd::Bs { m, sign, out } => {
            let sign = match sign.as_str() {
                "+" | "+1" => 1,
                "-" | "-1" => -1,
                other => return Err(format!("sign must be +1 or -1, got `{other}`")),
            };
            if m == 0 {
                return Err("m must be positive".to_string());
            }
            let doc = amalgam::bs_spec_document(m, sign);
            let path = out.unwrap_or_else(|| {
                PathBuf::from(format!("bs{m}{}.spec", if sign > 0 { "p" } else { "m" }))
            });
            std::fs::write(&path, doc).map_err(|e| format!("cannot write spec: {e}"))?;
            let _ = writeln!(stdout, "wrote {}", path.display());
            Ok(EXIT_OK)
        }
    }
}

fn load_group(path: &Path) -> Result<AmalgamGroup, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let spec = parse_amalgam_spec(&text).map_err(|e| e.to_string())?;
    build_amalgam(&spec).map_err(|e| e.to_string())
}

fn resolve_query(args: &QueryArgs) -> Result<RunConfig, String> {
    let text = std::fs::read_to_string(&args.spec)
        .map_err(|e| format!("cannot read {}: {e}", args.spec.display()))?;
    let spec = parse_amalgam_spec(&text).map_err(|e| e.to_string())?;
    let group = build_amalgam(&spec).map_err(|e| e.to_string())?;
    let combined = group.combined.clone();
    let file_query = spec.query;

    let subgroup = match &args.subgroup {
        Some(text) => text
            .split(',')
            .filter(|t| !t.trim().is_empty())
            .map(|t| parse_word(t, &combined).map_err(|e| e.to_string()))
            .collect::<Result<Vec<_>, _>>()?,
        None => file_query
            .as_ref()
            .map(|q| q.subgroup.clone())
            .unwrap_or_default(),
    };
    let target = match &args.element {
        Some(text) => parse_word(text, &combined).map_err(|e| e.to_string())?,
        None => file_query
            .as_ref()
            .map(|q| q.target.clone())
            .ok_or_else(|| "no element given (flag --element or spec file)".to_string())?,
    };
    let limits = Limits {
        wall_ms: args.limit_time.saturating_mul(1000),
        order_cap: args.limit_order,
        window: args.limit_window,
        ..Limits::default()
    };
    Ok(RunConfig {
        group,
        subgroup,
        target,
        limits,
        out: args.out.clone(),
        trace: args.trace.clone(),
    })
}

fn render_witness(witness: &Word, subgroup: &[Word], group: &AmalgamGroup) -> String {
    if witness.is_identity() {
        return "1".to_string();
    }
    let mut parts = Vec::new();
    let mut i = 0;
    let letters = witness.letters();
    while i < letters.len() {
        let l = letters[i];
        let mut run = 1;
        while i + run < letters.len() && letters[i + run] == l {
            run += 1;
        }
        let gen = serialize_word(&subgroup[l.sym], &group.combined);
        let exp = run as i64 * l.sign as i64;
        if exp == 1 {
            parts.push(format!("({gen})"));
        } else {
            parts.push(format!("({gen})^{exp}"));
        }
        i += run;
    }
    parts.join(" ")
}

fn run_decide(
    config: RunConfig,
    require_nonmember: bool,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<i32, String> {
    let mut trace = Vec::new();
    let decision = amalgam::decide_membership(
        &config.group,
        &config.subgroup,
        &config.target,
        &config.limits,
        &mut trace,
    );
    if let Some(path) = &config.trace {
        let mut text = String::new();
        for event in &trace {
            text.push_str(&event.render());
            text.push('\n');
        }
        std::fs::write(path, text).map_err(|e| format!("cannot write trace: {e}"))?;
    }
    let decision = match decision {
        Ok(d) => d,
        Err(SearchError::MemberDetected) => {
            let _ = writeln!(stderr, "element is a member; nothing to separate");
            return Ok(EXIT_INVALID);
        }
        Err(e) => return Err(e.to_string()),
    };
    match decision {
        Decision::Member { witness } => {
            if require_nonmember {
                let _ = writeln!(
                    stderr,
                    "element is a member (witness {}); nothing to separate",
                    render_witness(&witness, &config.subgroup, &config.group)
                );
                return Ok(EXIT_INVALID);
            }
            let _ = writeln!(
                stdout,
                "MEMBER witness = {}",
                render_witness(&witness, &config.subgroup, &config.group)
            );
            Ok(EXIT_OK)
        }
        Decision::NonMember { mut certificate } => {
            certificate
                .meta
                .insert("engine".to_string(), ENGINE_VERSION.to_string());
            certificate.meta.insert(
                "subgroup".to_string(),
                config
                    .subgroup
                    .iter()
                    .map(|w| serialize_word(w, &config.group.combined))
                    .collect::<Vec<_>>()
                    .join(", "),
            );
            certificate.meta.insert(
                "target".to_string(),
                serialize_word(&config.target, &config.group.combined),
            );
            let text = certificates::encode(&certificate);
            std::fs::write(&config.out, text)
                .map_err(|e| format!("cannot write certificate: {e}"))?;
            let _ = writeln!(
                stdout,
                "NON-MEMBER certificate = {} degree = {}",
                config.out.display(),
                certificate.degree()
            );
            Ok(EXIT_OK)
        }
        Decision::Unknown { rounds, detail } => {
            let _ = writeln!(stdout, "UNKNOWN rounds = {rounds} ({detail})");
            Ok(EXIT_UNKNOWN)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_vec(args: &[&str]) -> (i32, String, String) {
        let args: Vec<String> = args.iter().map(|s| s.to_string()).collect();
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(&args, &mut out, &mut err);
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    fn tmpdir() -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!(
            "lerf-cli-test-{}-{:?}",
            std::process::id(),
            std::thread::current().id()
        ));
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn usage_errors_exit_2() {
        let (code, _, _) = run_vec(&["frobnicate"]);
        assert_eq!(code, EXIT_USAGE);
        let (code, _, _) = run_vec(&[]);
        assert_eq!(code, EXIT_USAGE);
    }

    #[test]
    fn bs_decide_verify_pipeline() {
        let dir = tmpdir();
        let spec = dir.join("bs22.spec");
        let cert = dir.join("cert.txt");
        let trace = dir.join("trace.txt");

        let (code, out, _) = run_vec(&["bs", "2", "+1", "--out", spec.to_str().unwrap()]);
        assert_eq!(code, EXIT_OK, "{out}");

        let (code, decide_out, _) = run_vec(&[
            "decide",
            "--spec",
            spec.to_str().unwrap(),
            "--subgroup",
            "b^2, a",
            "--element",
            "b",
            "--out",
            cert.to_str().unwrap(),
            "--trace",
            trace.to_str().unwrap(),
        ]);
        assert_eq!(code, EXIT_OK, "{decide_out}");
        assert!(decide_out.starts_with("NON-MEMBER"), "{decide_out}");

        let trace_text = std::fs::read_to_string(&trace).unwrap();
        assert!(trace_text.contains("case1"));
        assert!(trace_text.contains("verdict non-member"));

        let (code, out, _) = run_vec(&["verify", cert.to_str().unwrap()]);
        assert_eq!(code, EXIT_OK, "{out}");
        assert!(out.starts_with("VALID"));

        // determinism: identical invocation produces identical bytes
        let bytes1 = std::fs::read(&cert).unwrap();
        let (code, out2, _) = run_vec(&[
            "decide",
            "--spec",
            spec.to_str().unwrap(),
            "--subgroup",
            "b^2, a",
            "--element",
            "b",
            "--out",
            cert.to_str().unwrap(),
            "--trace",
            trace.to_str().unwrap(),
        ]);
        assert_eq!(code, EXIT_OK);
        assert_eq!(decide_out, out2);
        assert_eq!(bytes1, std::fs::read(&cert).unwrap());

        // tampering is caught
        let mut tampered = String::from_utf8(bytes1).unwrap();
        tampered = tampered.replace("target b", "target b^2");
        let bad = dir.join("bad-cert.txt");
        std::fs::write(&bad, tampered).unwrap();
        let (code, out, _) = run_vec(&["verify", bad.to_str().unwrap()]);
        assert_eq!(code, EXIT_INVALID);
        assert!(out.starts_with("INVALID"), "{out}");
    }

    #[test]
    fn member_exits_zero_and_separate_rejects() {
        let dir = tmpdir();
        let spec = dir.join("bs22m.spec");
        run_vec(&["bs", "2", "+1", "--out", spec.to_str().unwrap()]);

        let (code, out, _) = run_vec(&[
            "decide",
            "--spec",
            spec.to_str().unwrap(),
            "--subgroup",
            "b^2",
            "--element",
            "a^-1 b^2 a",
            "--out",
            dir.join("c1.txt").to_str().unwrap(),
        ]);
        assert_eq!(code, EXIT_OK);
        assert!(out.starts_with("MEMBER"), "{out}");

        let (code, _, err) = run_vec(&[
            "separate",
            "--spec",
            spec.to_str().unwrap(),
            "--subgroup",
            "b^2",
            "--element",
            "a^-1 b^2 a",
            "--out",
            dir.join("c2.txt").to_str().unwrap(),
        ]);
        assert_eq!(code, EXIT_INVALID);
        assert!(err.contains("member"), "{err}");
    }

    #[test]
    fn nf_prints_reduced_sequence() {
        let dir = tmpdir();
        let spec = dir.join("bs22nf.spec");
        run_vec(&["bs", "2", "+1", "--out", spec.to_str().unwrap()]);
        let (code, out, _) = run_vec(&[
            "nf",
            "--spec",
            spec.to_str().unwrap(),
            "--element",
            "c b^-2",
        ]);
        assert_eq!(code, EXIT_OK);
        assert_eq!(out, "amalgam_part 1\n");
        let (code, out, _) = run_vec(&[
            "nf",
            "--spec",
            spec.to_str().unwrap(),
            "--element",
            "b a b",
        ]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("syllable B"), "{out}");
        assert!(out.contains("syllable A"), "{out}");
    }

    #[test]
    fn spec_file_query_block_is_used() {
        let dir = tmpdir();
        let spec = dir.join("query.spec");
        std::fs::write(
            &spec,
            "factor A abelian rank=2 names=a,c\n\
             factor B abelian rank=1 names=b\n\
             amalgam H = c\n\
             amalgam K = b^2\n\
             subgroup U = b^2, a\n\
             element a = b\n",
        )
        .unwrap();
        let (code, out, _) = run_vec(&[
            "decide",
            "--spec",
            spec.to_str().unwrap(),
            "--out",
            dir.join("c3.txt").to_str().unwrap(),
        ]);
        assert_eq!(code, EXIT_OK);
        assert!(out.starts_with("NON-MEMBER"), "{out}");
    }
}
