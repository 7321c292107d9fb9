use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use wsn_core::{Combiner, Fading, Fidelity, OutputFormat, SnrBasis};

#[derive(Debug, Parser)]
#[command(name = "wsn-sim", version, about = "Monte Carlo simulator for an MFSK sensor network with selection-combining fusion")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate BER and SER over a grid of operating points.
    Simulate(SimulateArgs),
    /// Print closed-form reference values over a grid of operating points.
    Oracle(OracleArgs),
    /// Run the acceptance suite.
    Verify(VerifyArgs),
}

/// Point parameters shared by `simulate` and `oracle`. Unset flags keep the
/// value from `--config`, or the built-in default.
#[derive(Debug, Args)]
pub struct PointArgs {
    /// Alphabet size (power of two).
    #[arg(long = "M", value_name = "M")]
    pub order: Option<usize>,
    /// Number of sensors.
    #[arg(long = "L", value_name = "L")]
    pub sensors: Option<usize>,
    /// SNR values in dB: a list `0,5,10` or an inclusive range `0:20:2`.
    #[arg(long, value_parser = parse_snr)]
    pub snr: Option<SnrList>,
    /// Whether the SNR is total energy per symbol or per bit.
    #[arg(long, value_parser = parse_enum::<SnrBasis>)]
    pub snr_basis: Option<SnrBasis>,
    /// Probability that a sensor detects the event correctly.
    #[arg(long)]
    pub pc: Option<f64>,
    /// Correlation coefficient between the sensors' channel gains.
    #[arg(long)]
    pub rho: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Sweep description in JSON; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub point: PointArgs,
    #[arg(long, value_parser = parse_enum::<Combiner>)]
    pub combiner: Option<Combiner>,
    #[arg(long, value_parser = parse_enum::<Fidelity>)]
    pub fidelity: Option<Fidelity>,
    #[arg(long, value_parser = parse_enum::<Fading>)]
    pub fading: Option<Fading>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads. Results do not depend on this.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Result file. Rows are appended as they finish and an existing file is resumed.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_parser = parse_enum::<OutputFormat>)]
    pub format: Option<OutputFormat>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub point: PointArgs,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Run only these criteria, by number.
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnrList(pub Vec<f64>);

fn parse_enum<T: std::str::FromStr<Err = wsn_core::Error>>(s: &str) -> Result<T, String> {
    s.parse().map_err(|e: wsn_core::Error| e.to_string())
}

fn parse_number(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

/// Parses `a,b,c` or `start:stop:step` (stop included when it lands on the grid).
pub fn parse_snr(s: &str) -> Result<SnrList, String> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [single] => {
            let values = single.split(',').map(parse_number).collect::<Result<Vec<_>, _>>()?;
            Ok(SnrList(values))
        }
        [start, stop, step] => {
            let (start, stop, step) = (parse_number(start)?, parse_number(stop)?, parse_number(step)?);
            if step <= 0.0 {
                return Err("range step must be positive".into());
            }
            if stop < start {
                return Err("range stop must not be below its start".into());
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize;
            if count > 100_000 {
                return Err("range has too many points".into());
            }
            Ok(SnrList((0..=count).map(|i| start + i as f64 * step).collect()))
        }
        _ => Err(format!("`{s}` is neither a list `a,b,c` nor a range `start:stop:step`")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snr_lists_and_ranges() {
        assert_eq!(parse_snr("10").unwrap(), SnrList(vec![10.0]));
        assert_eq!(parse_snr("0, 5,10").unwrap(), SnrList(vec![0.0, 5.0, 10.0]));
        assert_eq!(parse_snr("0:20:5").unwrap(), SnrList(vec![0.0, 5.0, 10.0, 15.0, 20.0]));
        assert_eq!(parse_snr("0:1:0.3").unwrap().0.len(), 4);
        assert_eq!(parse_snr("-4:-2:1").unwrap(), SnrList(vec![-4.0, -3.0, -2.0]));
        assert_eq!(parse_snr("0:0.3:0.1").unwrap().0.len(), 4);
    }

    #[test]
    fn snr_rejects_garbage() {
        for bad in ["", "a,b", "0:10", "0:10:0", "10:0:1", "1:2:3:4", "nan", "0:1e9:1e-3"] {
            assert!(parse_snr(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn flags_parse() {
        let cli = Cli::try_parse_from([
            "wsn-sim", "simulate", "--M", "16", "--L", "8", "--snr", "0:4:2", "--combiner", "egc",
            "--fading", "none", "--format", "json",
        ])
        .unwrap();
        let Command::Simulate(args) = cli.command else { panic!("wrong subcommand") };
        assert_eq!(args.point.order, Some(16));
        assert_eq!(args.point.snr.unwrap().0, vec![0.0, 2.0, 4.0]);
        assert_eq!(args.combiner, Some(Combiner::Egc));
        assert_eq!(args.fading, Some(Fading::None));
        assert_eq!(args.format, Some(OutputFormat::Json));
        assert!(Cli::try_parse_from(["wsn-sim", "simulate", "--combiner", "best"]).is_err());
    }
}
