use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use ccpb::Solution;
use serde::Serialize;

pub fn ensure_dir(dir: &Path) -> Result<(), String> {
    std::fs::create_dir_all(dir)
        .map_err(|e| format!("cannot create output directory {}: {e}", dir.display()))
}

pub fn write_with<F>(dir: &Path, name: &str, body: F) -> io::Result<PathBuf>
where
    F: FnOnce(&mut BufWriter<File>) -> io::Result<()>,
{
    let path = dir.join(name);
    let mut out = BufWriter::new(File::create(&path)?);
    body(&mut out)?;
    out.flush()?;
    Ok(path)
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> io::Result<PathBuf> {
    write_with(dir, name, |out| {
        serde_json::to_writer_pretty(&mut *out, value)?;
        writeln!(out)
    })
}

#[derive(Serialize)]
struct ProfileJson<'a> {
    summary: ccpb::solver::SolutionSummary,
    r: &'a [f64],
    u: &'a [f64],
    du_dr: Vec<f64>,
    rho: Vec<f64>,
}

pub fn write_profile_json<W: Write>(sol: &Solution, out: W) -> io::Result<()> {
    let doc = ProfileJson {
        summary: sol.summary(),
        r: sol.mesh.nodes(),
        u: &sol.u,
        du_dr: sol.du_nodal(),
        rho: sol.rho_nodal(),
    };
    serde_json::to_writer_pretty(out, &doc)?;
    Ok(())
}

fn quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', "''"))
}

/// Gnuplot script overlaying `U(r)` from the given CSV profiles.
pub fn profiles_script(files: &[(String, f64)]) -> String {
    let mut s = String::from(
        "set datafile separator ','\n\
         set terminal png size 900,600\n\
         set output 'profiles.png'\n\
         set xlabel 'r'\n\
         set ylabel 'U'\n\
         set key left bottom\n\
         plot \\\n",
    );
    let lines: Vec<String> = files
        .iter()
        .map(|(f, eps)| {
            format!(
                "  {} every ::1 using 1:2 with lines title 'eps = {eps:.4e}'",
                quote(f)
            )
        })
        .collect();
    s.push_str(&lines.join(", \\\n"));
    s.push('\n');
    s
}

pub fn xi_script(data: &str) -> String {
    format!(
        "set datafile separator ','\n\
         set terminal png size 900,600\n\
         set output 'xi.png'\n\
         set logscale x\n\
         set xlabel 'eps'\n\
         set ylabel 'U(R) - leading log(1/eps)'\n\
         plot {f} every ::1 using 1:2 with linespoints title 'numeric', \\\n  \
         {f} every ::1 using 1:3 with lines title 'limit'\n",
        f = quote(data)
    )
}

pub fn capacitance_script(data: &str, numeric: bool) -> String {
    let mut s = format!(
        "set datafile separator ','\n\
         set terminal png size 900,600\n\
         set output 'capacitance.png'\n\
         set logscale x\n\
         set xlabel 'gamma'\n\
         set ylabel 'capacitance'\n\
         plot {f} every ::1 using 1:2 with lines title 'limit', \\\n  \
         {f} every ::1 using 1:5 with lines dashtype 2 title 'series', \\\n  \
         {f} every ::1 using 1:6 with lines dashtype 3 title 'supremum'",
        f = quote(data)
    );
    if numeric {
        s.push_str(&format!(
            ", \\\n  {} every ::1 using 1:7 with points title 'numeric'",
            quote(data)
        ));
    }
    s.push('\n');
    s
}
