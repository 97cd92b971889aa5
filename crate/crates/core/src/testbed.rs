//! The four-inverter, five-bus islanded testbed with its nominal values.
//!
//! Inverters sit on buses 1 to 4, each tied to the central load bus 5; one
//! extra line ties buses 2 and 3. The fixed load is connected from the start
//! and the large load steps in at 3 s.

use crate::model::{
    clock_offset_rad, droop_from_percent, InverterParams, LoadEvent, MicrogridScenario, SimSettings,
};
use crate::network::{Bus, BusKind, Complex64, FilterParams, Line, LoadModel, NetworkModel};

pub const OMEGA_N: f64 = 377.0;
pub const V_NOMINAL: f64 = 480.0;
pub const P_REF: f64 = 2000.0;
pub const DROOP: f64 = 0.015;
/// Fixed load, W (consumption negative).
pub const FIXED_LOAD: f64 = -5000.0;
/// Large-load step, W.
pub const LARGE_LOAD: f64 = -2500.0;
pub const LARGE_LOAD_TIME: f64 = 3.0;
pub const LOAD_BUS: usize = 5;
pub const Z_LONG: Complex64 = Complex64::new(1.6965, 0.9425);
pub const Z_SHORT: Complex64 = Complex64::new(0.8482, 0.4712);
pub const L_F: f64 = 1.125e-3;
pub const C_F: f64 = 11.5e-6;
/// Default clock offsets, Hz.
pub const OFFSETS_HZ: [f64; 4] = [0.015, -0.015, 0.0075, -0.0075];

/// Droop gain of every inverter on the `P_ref` power base.
pub fn k_p() -> f64 {
    droop_from_percent(DROOP, P_REF, OMEGA_N).expect("constants are positive")
}

/// Four identical inverters with the default clock offsets and no local load.
pub fn testbed_fleet(k_s: f64, k_t: f64) -> Vec<InverterParams> {
    OFFSETS_HZ
        .iter()
        .enumerate()
        .map(|(i, &hz)| {
            InverterParams::new(i + 1, k_p())
                .with_gains(k_s, k_t)
                .with_gamma(clock_offset_rad(hz))
                .with_power(P_REF, 0.0)
        })
        .collect()
}

pub fn testbed_network() -> NetworkModel {
    let mut buses: Vec<Bus> = (1..=4)
        .map(|id| Bus {
            id,
            kind: BusKind::Inverter,
            v_mag: V_NOMINAL,
            p_load: 0.0,
        })
        .collect();
    buses.push(Bus {
        id: LOAD_BUS,
        kind: BusKind::Load,
        v_mag: V_NOMINAL,
        p_load: FIXED_LOAD,
    });
    let z = [Z_LONG, Z_SHORT, Z_LONG, Z_SHORT];
    let mut lines: Vec<Line> = (1..=4)
        .map(|i| Line {
            from: i,
            to: LOAD_BUS,
            z: z[i - 1],
        })
        .collect();
    lines.push(Line {
        from: 2,
        to: 3,
        z: Z_SHORT,
    });
    NetworkModel {
        buses,
        lines,
        load_model: LoadModel::ConstantPower,
        filter: Some(FilterParams { l_f: L_F, c_f: C_F }),
    }
}

/// Full testbed scenario: 120 s at 1 ms with the large-load step.
pub fn testbed_scenario(k_s: f64, k_t: f64) -> MicrogridScenario {
    MicrogridScenario {
        omega_n: OMEGA_N,
        inverters: testbed_fleet(k_s, k_t),
        network: Some(testbed_network()),
        load_events: vec![LoadEvent {
            time: LARGE_LOAD_TIME,
            bus: LOAD_BUS,
            delta_p: LARGE_LOAD,
        }],
        sim: SimSettings {
            dt: 1e-3,
            t_end: 120.0,
            initial_p_s: None,
            stride: 1,
        },
    }
}
