use std::io::Write;

use dldl_core::label::{cumulate, encode_cdf, encode_distribution, encode_ranking, ranking_from_distribution};
use dldl_core::LabelSpace;

use crate::cli::EncodeArgs;
use crate::output::{cell, write_text};

/// Summary of one encoding table.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodeSummary {
    pub labels: usize,
    pub distribution_sum: f64,
    /// `max_i |rank_i - (1 - (T p)_i)|` over the `K - 1` thresholds.
    pub max_rank_gap: f64,
}

/// Builds the table `label,distribution,cdf,erf_cdf,ranking,one_minus_cdf`.
/// `cdf` is the prefix sum of the distribution, `erf_cdf` the continuous normal c.d.f.;
/// the last row has no ranking entries.
pub fn encode_table(y: f64, sigma: f64, space: &LabelSpace) -> dldl_core::Result<(String, EncodeSummary)> {
    let dist = encode_distribution(y, sigma, space)?;
    let cdf = cumulate(&dist);
    let erf = encode_cdf(y, sigma, space)?;
    let rank = encode_ranking(y, space)?;
    let approx = ranking_from_distribution(&dist);
    let mut out = String::from("label,distribution,cdf,erf_cdf,ranking,one_minus_cdf\n");
    let k = space.len();
    for i in 0..k {
        let (r, a) = if i + 1 < k {
            (Some(rank.values[i]), Some(approx.values[i]))
        } else {
            (None, None)
        };
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            cell(Some(space.labels()[i])),
            cell(Some(dist.probs()[i])),
            cell(Some(cdf.values[i])),
            cell(Some(erf.values[i])),
            cell(r),
            cell(a)
        ));
    }
    let gap = rank
        .values
        .iter()
        .zip(&approx.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let summary = EncodeSummary {
        labels: k,
        distribution_sum: dist.probs().iter().sum(),
        max_rank_gap: gap,
    };
    Ok((out, summary))
}

pub fn run(args: &EncodeArgs, out: &mut dyn Write, err: &mut dyn Write) -> anyhow::Result<()> {
    let space = LabelSpace::try_from(args.grid)?;
    let (table, s) = encode_table(args.y, args.sigma, &space)?;
    match &args.output {
        Some(p) => write_text(p, &table)?,
        None => out.write_all(table.as_bytes())?,
    }
    writeln!(err, "labels: {}", s.labels)?;
    writeln!(err, "distribution sum: {:.12}", s.distribution_sum)?;
    writeln!(err, "max |ranking - (1 - cdf)|: {:e}", s.max_rank_gap)?;
    Ok(())
}
