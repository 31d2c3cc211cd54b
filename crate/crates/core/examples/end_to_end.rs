//! synth -> pipeline -> analyze -> stats -> report through the command line
//! entry point, in a temporary directory.

use dermalab::cli::main_with;

fn run(args: &[&str]) {
    let code = main_with(std::iter::once("dermalab").chain(args.iter().copied()));
    if code != 0 {
        eprintln!("dermalab {} exited with {code}", args.join(" "));
        std::process::exit(code);
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = tempfile::tempdir()?;
    let session = root.path().join("session");
    let run_dir = root.path().join("run");
    let (s, r) = (session.to_str().unwrap(), run_dir.to_str().unwrap());

    run(&["--seed", "7", "synth", "--windows", "40", "--relation", "co2", "-o", s]);
    run(&["pipeline", "--session", s, "-o", r]);
    run(&["--set", "forest.n_trees=200", "analyze", "--run", r]);
    run(&["stats", "--run", r, "--compare", "Tasks=task/task", "-o", r]);
    run(&["report", "--run", r, "-o", r]);

    let metrics = std::fs::read_to_string(run_dir.join("metrics.json"))?;
    println!("{metrics}");
    let report = std::fs::read_to_string(run_dir.join("report.md"))?;
    for line in report.lines().take(25) {
        println!("{line}");
    }
    let mut files: Vec<String> = std::fs::read_dir(&run_dir)?
        .map(|e| e.map(|e| e.file_name().to_string_lossy().into_owned()))
        .collect::<Result<_, _>>()?;
    files.sort();
    files.retain(|f| !f.starts_with("decomp_"));
    println!("outputs: {}", files.join(", "));
    Ok(())
}
