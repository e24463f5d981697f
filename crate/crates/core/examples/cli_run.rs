//! Drives the command-line front end from a config file, with one flag overriding it.

fn main() -> loopsoup::Result<()> {
    let dir = std::env::temp_dir().join("loopsoup-cli-example");
    std::fs::create_dir_all(&dir)?;
    let cfg = dir.join("alpha.cfg");
    std::fs::write(&cfg, "command = alpha\nkind = loop\nform = annulus\nz = 0,0\ndelta = 0.2  # overridden below\nR = 1\n")?;
    let args = ["loopsoup", "--config", cfg.to_str().unwrap(), "--delta", "0.1", "--out", dir.to_str().unwrap()];
    let config = loopsoup::cli::RunConfig::from_args(args.map(String::from))?;
    let manifest = loopsoup::cli::run(&config)?;
    print!("{}", std::fs::read_to_string(dir.join("alpha.csv"))?);
    println!("manifest checksums: {:?}", manifest.checksums);
    Ok(())
}
