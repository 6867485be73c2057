//! Independent reference Newton power flow for converter validation.
//!
//! Operates directly on case data and the bus admittance matrix -- the
//! model language, symbolic differentiation and the library solvers are
//! never involved. Classic polar mismatch formulation with its own dense
//! Gaussian elimination, so it shares no numerics with the code under test.

use num_complex::Complex64;

use modsolver::matpower::{build_ybus, BusType, CaseData};

/// Solve the case; returns complex bus voltages in bus-table order.
pub fn reference_power_flow(case: &CaseData) -> Result<Vec<Complex64>, String> {
    let n = case.buses.len();
    let ybus = build_ybus(case).map_err(|e| e.to_string())?.to_dense();

    // Bus classification mirrors the converter: PV requires an in-service
    // generator, everything else non-slack is PQ.
    let mut slack = None;
    let mut pv: Vec<usize> = Vec::new();
    let mut pq: Vec<usize> = Vec::new();
    let mut p_spec = vec![0.0f64; n];
    let mut q_spec = vec![0.0f64; n];
    let mut vm = vec![1.0f64; n];
    let mut va = vec![0.0f64; n];

    for (i, bus) in case.buses.iter().enumerate() {
        let mut pg = 0.0;
        let mut qg = 0.0;
        let mut vg = None;
        for g in case.gens_at(bus.id) {
            pg += g.pg;
            qg += g.qg;
            if vg.is_none() {
                vg = Some(g.vg);
            }
        }
        p_spec[i] = (pg - bus.pd) / case.base_mva;
        q_spec[i] = (qg - bus.qd) / case.base_mva;
        match bus.bus_type {
            BusType::Slack => {
                slack = Some(i);
                vm[i] = bus.vm;
                va[i] = bus.va_deg.to_radians();
            }
            BusType::Pv if vg.is_some() => {
                pv.push(i);
                vm[i] = vg.unwrap();
            }
            _ => pq.push(i),
        }
    }
    let slack = slack.ok_or("no slack bus")?;
    for &i in &pq {
        va[i] = va[slack];
    }
    for &i in &pv {
        va[i] = va[slack];
    }

    let unknown_theta: Vec<usize> = pv.iter().chain(pq.iter()).copied().collect();
    let unknown_v: Vec<usize> = pq.clone();
    let m = unknown_theta.len() + unknown_v.len();

    for _iter in 0..60 {
        // Injections at the current voltage.
        let mut p = vec![0.0f64; n];
        let mut q = vec![0.0f64; n];
        for i in 0..n {
            for (j, y) in ybus[i].iter().enumerate() {
                if y.re == 0.0 && y.im == 0.0 {
                    continue;
                }
                let th = va[i] - va[j];
                p[i] += vm[i] * vm[j] * (y.re * th.cos() + y.im * th.sin());
                q[i] += vm[i] * vm[j] * (y.re * th.sin() - y.im * th.cos());
            }
        }
        let mut mismatch = Vec::with_capacity(m);
        for &i in &unknown_theta {
            mismatch.push(p_spec[i] - p[i]);
        }
        for &i in &unknown_v {
            mismatch.push(q_spec[i] - q[i]);
        }
        let norm = mismatch.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
        if norm < 1e-11 {
            return Ok((0..n)
                .map(|i| Complex64::from_polar(vm[i], va[i]))
                .collect());
        }

        // Dense polar Jacobian.
        let mut jac = vec![vec![0.0f64; m]; m];
        let nt = unknown_theta.len();
        for (row, &i) in unknown_theta.iter().enumerate() {
            for (col, &j) in unknown_theta.iter().enumerate() {
                jac[row][col] = if i == j {
                    -q[i] - ybus[i][i].im * vm[i] * vm[i]
                } else {
                    let y = ybus[i][j];
                    let th = va[i] - va[j];
                    vm[i] * vm[j] * (y.re * th.sin() - y.im * th.cos())
                };
            }
            for (col, &j) in unknown_v.iter().enumerate() {
                jac[row][nt + col] = if i == j {
                    p[i] / vm[i] + ybus[i][i].re * vm[i]
                } else {
                    let y = ybus[i][j];
                    let th = va[i] - va[j];
                    vm[i] * (y.re * th.cos() + y.im * th.sin())
                };
            }
        }
        for (row, &i) in unknown_v.iter().enumerate() {
            for (col, &j) in unknown_theta.iter().enumerate() {
                jac[nt + row][col] = if i == j {
                    p[i] - ybus[i][i].re * vm[i] * vm[i]
                } else {
                    let y = ybus[i][j];
                    let th = va[i] - va[j];
                    -vm[i] * vm[j] * (y.re * th.cos() + y.im * th.sin())
                };
            }
            for (col, &j) in unknown_v.iter().enumerate() {
                jac[nt + row][nt + col] = if i == j {
                    q[i] / vm[i] - ybus[i][i].im * vm[i]
                } else {
                    let y = ybus[i][j];
                    let th = va[i] - va[j];
                    vm[i] * (y.re * th.sin() - y.im * th.cos())
                };
            }
        }

        let dx = gauss_solve(jac, mismatch)?;
        for (row, &i) in unknown_theta.iter().enumerate() {
            va[i] += dx[row];
        }
        for (row, &i) in unknown_v.iter().enumerate() {
            vm[i] += dx[nt + row];
        }
    }
    Err("reference power flow did not converge".into())
}

/// Plain dense Gaussian elimination with partial pivoting.
fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>, String> {
    let n = b.len();
    for k in 0..n {
        let mut piv = k;
        for i in k + 1..n {
            if a[i][k].abs() > a[piv][k].abs() {
                piv = i;
            }
        }
        if a[piv][k].abs() < 1e-14 {
            return Err(format!("singular reference Jacobian at column {k}"));
        }
        a.swap(k, piv);
        b.swap(k, piv);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            if f == 0.0 {
                continue;
            }
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    for k in (0..n).rev() {
        let mut s = b[k];
        for j in k + 1..n {
            s -= a[k][j] * b[j];
        }
        b[k] = s / a[k][k];
    }
    Ok(b)
}
