use anyhow::Result;
use fairchain::chain::{fit_many, ChainBundle, CHAIN_FORMAT_VERSION};

use crate::inputs::{display, load_data, load_plan, load_spec};
use crate::output::{timestamp, OutputDir, RunManifest, CSV_FORMAT_VERSION};
use crate::AdjustArgs;

pub fn run(args: &AdjustArgs) -> Result<u8> {
    let started_at = timestamp();
    let spec = load_spec(&args.spec)?;
    let plan = load_plan(&spec, args.m, args.seed)?;
    let data = load_data(&args.data, &spec)?;
    let fitted = fit_many(&data, &plan)?;

    let mut out = OutputDir::create(&args.out)?;
    let mut chains = Vec::with_capacity(fitted.len());
    for (chain, adjusted) in fitted {
        out.write(
            &adjusted.file_name(),
            adjusted.table.to_csv_string()?.as_bytes(),
            CSV_FORMAT_VERSION,
        )?;
        chains.push(chain);
    }
    for step in &chains[0].steps {
        println!("{}: {} (aic {:.2})", step.variable, step.model.family, step.model.aic);
    }
    out.write_json("chain.json", &ChainBundle::new(plan.clone(), chains), CHAIN_FORMAT_VERSION)?;
    println!(
        "wrote {} adjusted replicates to {}",
        plan.m_replicates,
        args.out.display()
    );
    out.finish(
        "manifest.json",
        RunManifest {
            command: "adjust".into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            input: display(&args.data),
            spec: display(&args.spec),
            adjusted: None,
            output_dir: display(&args.out),
            seed: plan.seed,
            m: Some(plan.m_replicates),
            started_at,
            finished_at: timestamp(),
            artifacts: Vec::new(),
        },
    )?;
    Ok(0)
}
