#![allow(dead_code)]

use std::sync::Arc;

use adm_toolkit::constraints::InitialDataSet;
use adm_toolkit::fields::{radius, Chart, Field, Jet, TypeParams, Valence};
use adm_toolkit::linearized::LapseShiftPair;

/// Non-conformally-flat metric with a momentum of nonzero divergence.
pub fn curved_base(chart: &Arc<Chart>) -> InitialDataSet {
    let g = Field::sym2(chart, Valence::COV2, |x| {
        let r = radius(x);
        let psi = 1.0 + 0.5 * r.recip();
        let p4 = psi.powi(4);
        let e = (r * r * (-1.0 / 9.0)).exp() * 0.05;
        (0..3)
            .map(|i| (0..3).map(|j| e * x[i] * x[j] + if i == j { p4 } else { Jet::constant(0.0) }).collect())
            .collect()
    });
    let pi = Field::sym2(chart, Valence::CON2, |x| {
        let r = radius(x);
        let e = (r * r * (-1.0 / 9.0)).exp() * 0.2;
        (0..3)
            .map(|i| {
                (0..3)
                    .map(|j| {
                        let mut v = x[i] * x[j] * 0.25;
                        if i == j {
                            v += Jet::constant(1.0);
                        }
                        if i == 0 {
                            v += x[j] * 0.5;
                        }
                        if j == 0 {
                            v += x[i] * 0.5;
                        }
                        e * v
                    })
                    .collect()
            })
            .collect()
    });
    InitialDataSet::new(g, pi, TypeParams::default()).unwrap()
}

pub fn test_pair(chart: &Arc<Chart>) -> LapseShiftPair {
    let f = Field::scalar(chart, |x| 1.0 + x[0] * 0.2 + x[1] * x[2] * 0.1);
    let x = Field::vector(chart, |x| vec![x[1] * 0.1, x[0] * -0.1 + x[2] * x[2] * 0.05, x[0] * x[1] * 0.03 + 0.2]);
    LapseShiftPair::new(f, x)
}
