use std::io::Write;

use crate::error::Result;

/// Extra per-sample data recorded by the network simulator.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSample {
    /// Inverter electrical output, W.
    pub p_gen: Vec<f64>,
    /// Absolute inverter frequencies, rad/s.
    pub omega: Vec<f64>,
    /// Line losses, W.
    pub losses: f64,
    /// Bus angles relative to the first bus, rad (network bus order).
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub p_s: Vec<f64>,
    /// Secondary reserve rate at this sample, W/s. Not exported.
    pub p_s_rate: Vec<f64>,
    pub delta_omega: f64,
    /// Locally measured frequency deviation `Δω_i − γ_i`.
    pub freq_meas: Vec<f64>,
    pub network: Option<NetworkSample>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    /// Inverter ids, naming the per-inverter CSV columns.
    pub ids: Vec<usize>,
    pub samples: Vec<Sample>,
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

impl Trajectory {
    pub fn last(&self) -> &Sample {
        self.samples
            .last()
            .expect("trajectory has at least one sample")
    }

    /// Sample closest to `t`.
    pub fn at(&self, t: f64) -> &Sample {
        self.samples
            .iter()
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
            .expect("trajectory has at least one sample")
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["t".to_string()];
        h.extend(self.ids.iter().map(|i| format!("Ps_{i}")));
        h.push("delta_omega".into());
        h.extend(self.ids.iter().map(|i| format!("freq_meas_{i}")));
        if self.has_network() {
            h.extend(self.ids.iter().map(|i| format!("Pgen_{i}")));
            h.extend(self.ids.iter().map(|i| format!("omega_{i}")));
            h.push("losses".into());
        }
        h
    }

    fn has_network(&self) -> bool {
        self.samples.first().is_some_and(|s| s.network.is_some())
    }

    /// Writes one row per sample, every value with 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.header())?;
        let net = self.has_network();
        for s in &self.samples {
            let mut row = Vec::with_capacity(4 * s.p_s.len() + 3);
            row.push(fmt(s.t));
            row.extend(s.p_s.iter().copied().map(fmt));
            row.push(fmt(s.delta_omega));
            row.extend(s.freq_meas.iter().copied().map(fmt));
            if net {
                let n = s.network.as_ref().expect("network samples are uniform");
                row.extend(n.p_gen.iter().copied().map(fmt));
                row.extend(n.omega.iter().copied().map(fmt));
                row.push(fmt(n.losses));
            }
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }
}
