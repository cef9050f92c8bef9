use std::io::Write;

use dldl_core::gradcheck::{run_suite, Fault, GradcheckCase};
use dldl_core::model::HeadKind;

use crate::cli::{FaultArg, GradcheckArgs};
use crate::error::GradcheckFailed;

/// Per-head aggregate of a suite run.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadCheck {
    pub head: HeadKind,
    pub cases: usize,
    pub failures: usize,
    pub max_rel_err: f64,
}

pub fn cmd_gradcheck(
    heads: &[HeadKind],
    count: usize,
    seed: u64,
    tolerance: f64,
    fault: Option<Fault>,
) -> anyhow::Result<(Vec<HeadCheck>, Vec<GradcheckCase>)> {
    let cases = run_suite(heads, count, seed, tolerance, fault)?;
    let per_head = heads
        .iter()
        .map(|&h| {
            let mine: Vec<&GradcheckCase> = cases.iter().filter(|c| c.head == h).collect();
            HeadCheck {
                head: h,
                cases: mine.len(),
                failures: mine.iter().filter(|c| !c.passed).count(),
                max_rel_err: mine.iter().map(|c| c.max_rel_err).fold(0.0, f64::max),
            }
        })
        .collect();
    Ok((per_head, cases))
}

/// Prints one line per head; any failure becomes a [`GradcheckFailed`] error.
pub fn run(args: &GradcheckArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let heads = args.heads.clone().unwrap_or_else(|| HeadKind::ALL.to_vec());
    let fault = args.inject_fault.map(|FaultArg::FlipErSign| Fault::FlipErSign);
    let (rows, cases) = cmd_gradcheck(&heads, args.count, args.seed, args.tolerance, fault)?;
    writeln!(out, "tolerance {:e}, step 1e-6, {} configurations per head", args.tolerance, args.count)?;
    for r in &rows {
        let status = if r.failures == 0 { "PASS" } else { "FAIL" };
        writeln!(
            out,
            "{status} {:<8} max_rel_err {:.3e} ({}/{} failed)",
            r.head.name(),
            r.max_rel_err,
            r.failures,
            r.cases
        )?;
    }
    let failures = cases.iter().filter(|c| !c.passed).count();
    if failures > 0 {
        return Err(GradcheckFailed {
            failures,
            total: cases.len(),
        }
        .into());
    }
    Ok(())
}
