//! gnuplot scripts for the CSV outputs.

use std::path::Path;

fn quoted(p: &Path) -> String {
    format!("'{}'", p.display().to_string().replace('\'', "''"))
}

/// A curve when one axis is fixed, a colored map for a grid.
pub fn car_scan_script(csv: &Path, n_lengths: usize, n_powers: usize) -> String {
    let data = quoted(csv);
    let mut s = String::from("set datafile separator ','\nset grid\n");
    if n_lengths > 1 && n_powers > 1 {
        s += "set xlabel 'carrier power (mW)'\nset ylabel 'length (km)'\nset cblabel 'CAR'\nset logscale cb\n";
        s += &format!("plot {data} every ::1 using 2:1:3 with points pointtype 5 palette notitle\n");
    } else if n_lengths > 1 {
        s += "set xlabel 'length (km)'\nset ylabel 'CAR'\nset logscale y\n";
        s += &format!("plot {data} every ::1 using 1:3 with linespoints title 'CAR'\n");
    } else {
        s += "set xlabel 'carrier power (mW)'\nset ylabel 'CAR'\n";
        s += &format!("plot {data} every ::1 using 2:3 with linespoints title 'CAR'\n");
    }
    s
}

pub fn stability_script(csv: &Path, label: &str) -> String {
    let data = quoted(csv);
    format!(
        "set datafile separator ','\nset logscale xy\nset grid\nset format y '%g'\n\
         set xlabel 'averaging time (s)'\nset ylabel '{label}'\n\
         plot {data} every ::1 using 1:2:3:4 with yerrorlines title '{label}'\n"
    )
}
