//! Query dispatch for specification files and the reports they produce.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use crate::equiv::{
    barb_equivalent, build_probe, context_closure_check, fresh_observer, oracle_bisim, static_equivalent,
    weak_labeled_bisim, EquivVerdict, ProbeSpec, VerdictKind,
};
use crate::error::{Error, Result};
use crate::lts::{ExplorationConfig, Explorer};
use crate::normal::{normalize_process, struct_equiv_with, DEFAULT_UNFOLDINGS};
use crate::syntax::{LocatedQuery, ProbeKind, Query, SpecFile};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Text,
    Json,
    Dot,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Success,
    Equivalent,
    Inconclusive,
    Distinguished,
    Error,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Success | Outcome::Equivalent => 0,
            Outcome::Distinguished => 1,
            Outcome::Inconclusive => 2,
            Outcome::Error => 3,
        }
    }

    /// Error outranks distinguished, which outranks inconclusive.
    fn severity(self) -> u8 {
        match self {
            Outcome::Success | Outcome::Equivalent => 0,
            Outcome::Inconclusive => 1,
            Outcome::Distinguished => 2,
            Outcome::Error => 3,
        }
    }
}

impl From<VerdictKind> for Outcome {
    fn from(k: VerdictKind) -> Self {
        match k {
            VerdictKind::Equivalent => Outcome::Equivalent,
            VerdictKind::Distinguished => Outcome::Distinguished,
            VerdictKind::Inconclusive => Outcome::Inconclusive,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub query: String,
    pub outcome: Outcome,
    #[serde(skip)]
    pub text: String,
    pub result: Value,
    #[serde(skip)]
    pub dot: Option<String>,
    pub elapsed_ms: u128,
}

impl Report {
    fn new(query: &str, outcome: Outcome, text: String, result: Value) -> Self {
        Report {
            query: query.to_string(),
            outcome,
            text,
            result,
            dot: None,
            elapsed_ms: 0,
        }
    }

    fn error(query: &str, e: &Error) -> Self {
        Report::new(query, Outcome::Error, format!("error: {e}"), json!({ "error": e.to_string() }))
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Dot if self.dot.is_some() => self.dot.clone().unwrap_or_default(),
            Format::Json => serde_json::to_string_pretty(self).unwrap_or_default(),
            _ => format!("query {}: {}\n{}", self.query, outcome_word(self.outcome), self.text),
        }
    }
}

fn outcome_word(o: Outcome) -> &'static str {
    match o {
        Outcome::Success => "ok",
        Outcome::Equivalent => "equivalent",
        Outcome::Distinguished => "distinguished",
        Outcome::Inconclusive => "inconclusive",
        Outcome::Error => "error",
    }
}

/// The combined exit code of several reports.
pub fn exit_code(reports: &[Report]) -> i32 {
    reports
        .iter()
        .map(|r| r.outcome)
        .max_by_key(|o| o.severity())
        .map_or(0, Outcome::exit_code)
}

/// All reports as one JSON document, with the bounds that produced them.
pub fn reports_json(reports: &[Report], cfg: &ExplorationConfig) -> String {
    serde_json::to_string_pretty(&json!({
        "bounds": cfg,
        "exit_code": exit_code(reports),
        "reports": reports,
    }))
    .unwrap_or_default()
}

/// Runs one query; failures become error reports. Relative output paths
/// resolve against `base`.
pub fn run_query(spec: &SpecFile, q: &LocatedQuery, cfg: &ExplorationConfig, base: &Path) -> Report {
    let start = Instant::now();
    let mut report = match dispatch(spec, q, cfg, base) {
        Ok(r) => r,
        Err(e) => Report::error(&q.text, &e),
    };
    report.elapsed_ms = start.elapsed().as_millis();
    report
}

pub fn run_all(spec: &SpecFile, cfg: &ExplorationConfig, base: &Path) -> Vec<Report> {
    spec.queries.iter().map(|q| run_query(spec, q, cfg, base)).collect()
}

fn verdict_report(query: &str, v: &EquivVerdict) -> Report {
    Report::new(
        query,
        v.kind().into(),
        match v {
            EquivVerdict::Equivalent { witness } => format!("witness relation of {} pairs", witness.len()),
            EquivVerdict::Distinguished { evidence } => format!("evidence:\n{evidence}"),
            EquivVerdict::Inconclusive { reason } => reason.clone(),
        },
        serde_json::to_value(v).unwrap_or(Value::Null),
    )
}

fn dispatch(spec: &SpecFile, q: &LocatedQuery, cfg: &ExplorationConfig, base: &Path) -> Result<Report> {
    let th = &spec.theory;
    let text = q.text.as_str();
    Ok(match &q.query {
        Query::Normalize(p) => {
            let nf = normalize_process(spec.process(p)?, th)?;
            Report::new(
                text,
                Outcome::Success,
                nf.to_string(),
                json!({
                    "normal_form": nf.to_string(),
                    "names": nf.names.iter().map(|n| n.to_string()).collect::<Vec<_>>(),
                    "frame": nf.frame.to_string(),
                    "body": nf.body.to_string(),
                }),
            )
        }
        Query::Frame(p) => {
            let nf = normalize_process(spec.process(p)?, th)?;
            let names: Vec<String> = nf.names.iter().map(|n| n.to_string()).collect();
            let shown = if names.is_empty() {
                nf.frame.to_string()
            } else {
                format!("new {}.{}", names.join(", "), nf.frame)
            };
            Report::new(text, Outcome::Success, shown, json!({ "names": names, "frame": nf.frame.to_string() }))
        }
        Query::Lts { process, output } => {
            let a = spec.process(process)?;
            let mut ex = Explorer::new(th, cfg.clone(), &[a]);
            let lts = match ex.add_process(a).and_then(|root| ex.materialize(root)) {
                Ok(l) => l,
                Err(Error::StateBudgetExceeded(n)) => {
                    return Ok(Report::new(
                        text,
                        Outcome::Inconclusive,
                        format!("state budget of {n} exhausted"),
                        json!({ "reason": "state budget exhausted" }),
                    ))
                }
                Err(e) => return Err(e),
            };
            let truncated = lts.exhausted.iter().filter(|&&e| e).count();
            let mut body = String::new();
            let _ = writeln!(body, "{} states, {} transitions", lts.states.len(), lts.edges.len());
            if truncated > 0 {
                let _ = writeln!(body, "{truncated} states reached the replication bound");
            }
            if let Some(path) = output {
                let path = resolve(base, path);
                let content = if path.extension().is_some_and(|e| e == "dot") {
                    lts.to_dot()
                } else {
                    lts.to_lines()
                };
                std::fs::write(&path, content).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                let _ = write!(body, "written to {}", path.display());
            } else {
                for (i, s) in lts.states.iter().enumerate() {
                    let _ = writeln!(body, "s{i}: {s}");
                }
                body.push_str(lts.to_lines().trim_end());
            }
            let mut r = Report::new(
                text,
                Outcome::Success,
                body.trim_end().to_string(),
                json!({
                    "states": lts.states.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
                    "exhausted": lts.exhausted,
                    "edges": lts.edges,
                }),
            );
            r.dot = Some(lts.to_dot());
            r
        }
        Query::Transitions(p) => {
            let a = spec.process(p)?;
            let mut ex = Explorer::new(th, cfg.clone(), &[a]);
            let root = ex.add_process(a)?;
            let moves = ex.moves(root)?;
            let mut body = String::new();
            let mut items = Vec::new();
            for m in moves.iter() {
                let target = ex.state(m.target).to_string();
                let status = if m.holds { "" } else { " (test fails)" };
                let _ = writeln!(body, "--{}--> {target}{status}", m.action);
                items.push(json!({ "action": m.action, "holds": m.holds, "target": target }));
            }
            if moves.is_empty() {
                body.push_str("no transitions");
            }
            Report::new(text, Outcome::Success, body.trim_end().to_string(), json!({ "transitions": items }))
        }
        Query::Barbs(p) => {
            let a = spec.process(p)?;
            let mut ex = Explorer::new(th, cfg.clone(), &[a]);
            let root = ex.add_process(a)?;
            let (set, complete) = ex.barbs(root)?;
            let names: Vec<String> = set.iter().map(|n| n.to_string()).collect();
            let mut body = format!("{{{}}}", names.join(", "));
            if !complete {
                body.push_str("\nreplication bound reached; more barbs may exist");
            }
            let outcome = if complete { Outcome::Success } else { Outcome::Inconclusive };
            Report::new(text, outcome, body, json!({ "barbs": names, "complete": complete }))
        }
        Query::Bisim(a, b) => verdict_report(text, &weak_labeled_bisim(spec.process(a)?, spec.process(b)?, th, cfg)?),
        Query::Oracle(a, b) => verdict_report(text, &oracle_bisim(spec.process(a)?, spec.process(b)?, th, cfg)?),
        Query::Static(a, b) => verdict_report(text, &static_equivalent(spec.process(a)?, spec.process(b)?, th, cfg)?),
        Query::BarbEq(a, b) => verdict_report(text, &barb_equivalent(spec.process(a)?, spec.process(b)?, th, cfg)?),
        Query::Struct(a, b) => {
            let (pa, pb) = (spec.process(a)?, spec.process(b)?);
            let same = struct_equiv_with(pa, pb, th, DEFAULT_UNFOLDINGS)?;
            let outcome = match (same, pa.has_replication() || pb.has_replication()) {
                (true, _) => Outcome::Equivalent,
                (false, false) => Outcome::Distinguished,
                (false, true) => Outcome::Inconclusive,
            };
            let body = match outcome {
                Outcome::Equivalent => "same canonical form".to_string(),
                Outcome::Distinguished => "canonical forms differ".to_string(),
                _ => format!("no common canonical form within {DEFAULT_UNFOLDINGS} unfoldings"),
            };
            Report::new(text, outcome, body, json!({ "structurally_equivalent": same }))
        }
        Query::Probe {
            kind,
            process,
            left,
            right,
        } => {
            let target = spec.process(process)?;
            let a = fresh_observer(&[target]);
            let probe = match kind {
                ProbeKind::Test => ProbeSpec::Test {
                    left: left.clone(),
                    right: right.clone(),
                    a: a.clone(),
                },
                ProbeKind::Input => ProbeSpec::Input {
                    channel: left.clone(),
                    message: right.clone(),
                    a: a.clone(),
                },
                ProbeKind::Output => ProbeSpec::Output {
                    channel: left.clone(),
                    message: right.clone(),
                    a: a.clone(),
                },
            };
            let composite = build_probe(&probe, target)?;
            if !composite.is_closed() {
                return Err(Error::PreconditionViolated(format!("probe composite {composite} is not closed")));
            }
            let mut ex = Explorer::new(th, cfg.clone(), &[&composite]);
            let root = ex.add_process(&composite)?;
            let (set, complete) = ex.barbs(root)?;
            let has = set.contains(&a);
            let outcome = if has || complete { Outcome::Success } else { Outcome::Inconclusive };
            let body = format!(
                "{composite}\nbarb {a}: {}",
                match (has, complete) {
                    (true, _) => "present",
                    (false, true) => "absent",
                    (false, false) => "not found within the replication bound",
                }
            );
            Report::new(
                text,
                outcome,
                body,
                json!({ "composite": composite.to_string(), "observer": a.to_string(), "barb": has }),
            )
        }
        Query::Closure { left, right, contexts } => {
            let ctxs = contexts
                .iter()
                .map(|(us, c)| Ok((us.clone(), spec.process(c)?.clone())))
                .collect::<Result<Vec<_>>>()?;
            verdict_report(
                text,
                &context_closure_check(spec.process(left)?, spec.process(right)?, &ctxs, th, cfg)?,
            )
        }
    })
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_spec_str;

    fn run(src: &str) -> Vec<Report> {
        let spec = parse_spec_str(src).unwrap();
        run_all(&spec, &ExplorationConfig::default(), Path::new("."))
    }

    #[test]
    fn bisim_exit_codes() {
        let r = run("name c. const one.
            process P = out(c, 0).0. process Q = out(c, one).0.
            query bisim P Q. query bisim P P.");
        assert_eq!(r[0].outcome, Outcome::Distinguished);
        assert!(r[0].text.contains("evidence"), "{}", r[0].text);
        assert_eq!(r[1].outcome, Outcome::Equivalent);
        assert_eq!(exit_code(&r), 1);
        assert_eq!(exit_code(&r[1..]), 0);
    }

    #[test]
    fn normalize_and_lts() {
        let dir = std::env::temp_dir().join(format!("appi-q-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let spec = parse_spec_str("name c. process P = new k.out(c, k).0. query normalize P. query lts P > p.dot.").unwrap();
        let r = run_all(&spec, &ExplorationConfig::default(), &dir);
        assert_eq!(r[0].outcome, Outcome::Success);
        assert_eq!(r[1].outcome, Outcome::Success, "{}", r[1].text);
        let dot = std::fs::read_to_string(dir.join("p.dot")).unwrap();
        assert!(dot.starts_with("digraph lts {"));
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn errors_dominate() {
        let r = run("name c. process P = out(c, 0).0. process R = !out(c, 0).0.
            query bisim P R. query closure P P with R.");
        assert_eq!(r.len(), 2);
        assert_ne!(r[0].outcome, Outcome::Error);
        let outcomes = [Outcome::Inconclusive, Outcome::Distinguished, Outcome::Error, Outcome::Success];
        let reports: Vec<Report> = outcomes
            .iter()
            .map(|&o| Report::new("q", o, String::new(), Value::Null))
            .collect();
        assert_eq!(exit_code(&reports), 3);
        assert_eq!(exit_code(&reports[..2]), 1);
        assert_eq!(exit_code(&reports[..1]), 2);
    }

    #[test]
    fn probe_query() {
        let r = run("const one. var x. process A = {0/x}. process B = {one/x}.
            query probe test A x 0. query probe test B x 0. query static A B.");
        assert!(r[0].text.contains("present"), "{}", r[0].text);
        assert!(r[1].text.contains("absent"), "{}", r[1].text);
        assert_eq!(r[2].outcome, Outcome::Distinguished);
    }
}
