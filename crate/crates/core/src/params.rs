use crate::channel::{
    BeamformingGains, ChannelParams, GainRole, KFactor, LinkKind, LosModelParams, PathLossParams,
    PowerLaw, RicianKModel,
};
use crate::error::{Error, Result};

/// Scenario constants shared by the analytic engine and the simulator.
#[derive(Debug, Clone)]
pub struct NetworkParams {
    /// TBS density [1/m²].
    pub lambda_t: f64,
    /// Relay density [1/m²].
    pub lambda_r: f64,
    /// Relay altitude [m].
    pub h_r: f64,
    /// TBS transmit power [W].
    pub p_t: f64,
    /// Relay transmit power [W].
    pub p_r: f64,
    /// Noise power [W].
    pub sigma2: f64,
    pub gains: BeamformingGains,
    pub channel: ChannelParams,
}

impl Default for NetworkParams {
    /// The reference scenario, with the relays at 1000 m.
    fn default() -> Self {
        let los = PowerLaw {
            intercept: 0.01,
            exponent: 3.0,
        };
        let nlos = PowerLaw {
            intercept: 0.01,
            exponent: 4.0,
        };
        Self {
            lambda_t: 5e-8,
            lambda_r: 1e-7,
            h_r: 1000.0,
            p_t: 1.0,
            p_r: 1.0,
            sigma2: 1e-10,
            gains: BeamformingGains {
                tbs_main: 2.0,
                tbs_side: 0.5,
                rn_main: 1.0,
                rn_side: 1.0,
            },
            channel: ChannelParams {
                path_loss: PathLossParams {
                    g2g_los: los,
                    g2g_nlos: nlos,
                    a2g_los: los,
                    a2g_nlos: nlos,
                },
                los: LosModelParams {
                    d1: 18.0,
                    d2: 63.0,
                    a: 9.612,
                    b: 0.158,
                },
                k_factor: RicianKModel {
                    g2g_los: KFactor::Constant(10.0),
                    g2g_nlos: KFactor::Constant(0.0),
                    a2g_los: KFactor::Constant(10.0),
                    a2g_nlos: KFactor::Constant(0.0),
                },
            },
        }
    }
}

impl NetworkParams {
    pub fn with_altitude(mut self, h_r: f64) -> Self {
        self.h_r = h_r;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda_t", self.lambda_t),
            ("lambda_r", self.lambda_r),
            ("p_t", self.p_t),
            ("p_r", self.p_r),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("must be > 0, got {v}")));
            }
        }
        for (name, v) in [("h_r", self.h_r), ("sigma2", self.sigma2)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("must be >= 0, got {v}")));
            }
        }
        let g = &self.gains;
        if !(g.tbs_side >= 0.0 && g.tbs_main >= g.tbs_side && g.tbs_main > 0.0) {
            return Err(Error::invalid(
                "gains.tbs",
                format!(
                    "need main >= side >= 0, got {} / {}",
                    g.tbs_main, g.tbs_side
                ),
            ));
        }
        if !(g.rn_side >= 0.0 && g.rn_main >= g.rn_side && g.rn_main > 0.0) {
            return Err(Error::invalid(
                "gains.rn",
                format!("need main >= side >= 0, got {} / {}", g.rn_main, g.rn_side),
            ));
        }
        let pl = &self.channel.path_loss;
        for (name, law) in [
            ("path_loss.g2g_los", pl.g2g_los),
            ("path_loss.g2g_nlos", pl.g2g_nlos),
            ("path_loss.a2g_los", pl.a2g_los),
            ("path_loss.a2g_nlos", pl.a2g_nlos),
        ] {
            if !(law.intercept > 0.0 && law.exponent > 0.0) {
                return Err(Error::invalid(name, "intercept and exponent must be > 0"));
            }
        }
        let los = &self.channel.los;
        for (name, v) in [
            ("los.d1", los.d1),
            ("los.d2", los.d2),
            ("los.a", los.a),
            ("los.b", los.b),
        ] {
            if !(v > 0.0) {
                return Err(Error::invalid(name, format!("must be > 0, got {v}")));
            }
        }
        let k = &self.channel.k_factor;
        for (name, f) in [
            ("k_factor.g2g_los", &k.g2g_los),
            ("k_factor.g2g_nlos", &k.g2g_nlos),
            ("k_factor.a2g_los", &k.a2g_los),
            ("k_factor.a2g_nlos", &k.a2g_nlos),
        ] {
            if let KFactor::Constant(v) = f {
                if !(*v >= 0.0) {
                    return Err(Error::invalid(name, format!("must be >= 0, got {v}")));
                }
            }
        }
        Ok(())
    }

    /// Non-fatal configuration warnings.
    pub fn warnings(&self) -> Vec<String> {
        self.channel.path_loss.warnings()
    }

    /// Density of the process the link's transmitters are drawn from.
    pub fn density(&self, link: LinkKind) -> f64 {
        match link {
            LinkKind::Sd | LinkKind::Sr => self.lambda_t,
            LinkKind::Rd => self.lambda_r,
        }
    }

    pub fn tx_power(&self, link: LinkKind) -> f64 {
        match link {
            LinkKind::Sd | LinkKind::Sr => self.p_t,
            LinkKind::Rd => self.p_r,
        }
    }

    pub fn gain(&self, link: LinkKind, role: GainRole) -> f64 {
        crate::channel::beamforming_gain(link, role, &self.gains)
    }
}
