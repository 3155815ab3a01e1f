//! `staf` command-line interface.
//!
//! One process per command; every command is deterministic given `--seed`
//! (timing fields aside) and writes its artifacts atomically into the
//! requested output directory. Failures print a machine-readable JSON error
//! to stderr and exit nonzero.

mod commands;
mod opts;

use clap::Parser;

#[derive(Parser)]
#[command(name = "staf", version, about = "Neural fields with trainable sinusoidal activations")]
enum Cli {
    /// Fit a network to an image, audio clip, or 1-D signal.
    Fit(opts::FitArgs),
    /// Reconstruct from a checkpoint and score against a reference.
    Eval(opts::EvalArgs),
    /// Finite-difference check of every parameter gradient.
    Gradcheck(opts::GradcheckArgs),
    /// Moment statistics of the initialization scheme.
    VerifyInit(opts::VerifyInitArgs),
    /// Functional equality of the Kronecker-equivalent sine network.
    VerifyKronecker(opts::VerifyKroneckerArgs),
    /// Delannoy count of the frequency lattice.
    Delannoy(opts::DelannoyArgs),
    /// Enumerate the potential-frequency set of an embedding.
    Freqset(opts::FreqsetArgs),
    /// Empirical or analytic neural tangent kernel.
    Ntk(opts::NtkArgs),
    /// Eigendecomposition of a saved kernel.
    Spectrum(opts::SpectrumArgs),
}

fn main() {
    let code = match Cli::parse() {
        Cli::Fit(args) => commands::run(|| commands::fit(args)),
        Cli::Eval(args) => commands::run(|| commands::eval(args)),
        Cli::Gradcheck(args) => commands::run(|| commands::gradcheck(args)),
        Cli::VerifyInit(args) => commands::run(|| commands::verify_init(args)),
        Cli::VerifyKronecker(args) => commands::run(|| commands::verify_kronecker(args)),
        Cli::Delannoy(args) => commands::run(|| commands::delannoy(args)),
        Cli::Freqset(args) => commands::run(|| commands::freqset(args)),
        Cli::Ntk(args) => commands::run(|| commands::ntk(args)),
        Cli::Spectrum(args) => commands::run(|| commands::spectrum(args)),
    };
    std::process::exit(code);
}
