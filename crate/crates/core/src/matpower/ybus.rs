//! Bus admittance matrix assembly from branch and shunt data.

use num_complex::Complex64;

use crate::error::Error;
use crate::sparse::{Csc, Triplets};

use super::case::CaseData;

/// Build the complex bus admittance matrix, rows/columns in bus-table
/// order. Out-of-service branches are skipped; the tap (with phase shift)
/// sits on the from side:
///   Yff += (ys + jb/2)/t^2
///   Yft += -ys / (t e^{-j shift})
///   Ytf += -ys / (t e^{+j shift})
///   Ytt +=  ys + jb/2
/// Bus shunts add (Gs + jBs)/baseMVA on the diagonal.
pub fn build_ybus(case: &CaseData) -> Result<Csc<Complex64>, Error> {
    let n = case.buses.len();
    let index = case.bus_index();
    let mut t = Triplets::new(n, n);
    for br in &case.branches {
        if !br.status {
            continue;
        }
        if br.r == 0.0 && br.x == 0.0 {
            return Err(Error::Case(format!(
                "branch {}-{} has zero impedance",
                br.from, br.to
            )));
        }
        let ys = Complex64::new(1.0, 0.0) / Complex64::new(br.r, br.x);
        let bc = Complex64::new(0.0, br.b / 2.0);
        let tap = if br.tap == 0.0 { 1.0 } else { br.tap };
        let shift = br.shift_deg.to_radians();
        let t_phasor = Complex64::from_polar(tap, shift);
        let f = index[&br.from];
        let to = index[&br.to];
        t.push(f, f, (ys + bc) / (tap * tap));
        t.push(f, to, -ys / t_phasor.conj());
        t.push(to, f, -ys / t_phasor);
        t.push(to, to, ys + bc);
    }
    for (i, bus) in case.buses.iter().enumerate() {
        if bus.gs != 0.0 || bus.bs != 0.0 {
            t.push(
                i,
                i,
                Complex64::new(bus.gs / case.base_mva, bus.bs / case.base_mva),
            );
        }
    }
    Ok(t.to_csc())
}
