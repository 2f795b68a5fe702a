//! Square arena with a corner light, differential-drive kinematics and the
//! per-step toward/away classification.

use std::f64::consts::{FRAC_PI_4, FRAC_PI_8, PI};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// A point in the arena plane, metres.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        self.distance_sq(other).sqrt()
    }

    #[inline]
    pub fn distance_sq(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}

/// Physical parameters of the arena and the robot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArenaConfig {
    /// Side of the square arena (m).
    pub side: f64,
    /// Light position; must be one of the arena corners (m).
    pub light: Point,
    /// Speed of a wheel driven at level 1 (m/s).
    pub wheel_speed: f64,
    /// Distance between the wheels (m).
    pub axle_length: f64,
    /// Duration of one control step (s).
    pub dt: f64,
    /// Robot body radius; the centre stays this far from the walls (m).
    pub robot_radius: f64,
    /// Radius of the quarter-disc start region around the corner opposite
    /// the light (m).
    pub start_radius: f64,
}

impl Default for ArenaConfig {
    fn default() -> Self {
        ArenaConfig {
            side: 1.0,
            light: Point::new(1.0, 1.0),
            wheel_speed: 0.02,
            axle_length: 0.053,
            dt: 0.1,
            robot_radius: 0.035,
            start_radius: 0.2,
        }
    }
}

impl ArenaConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("arena.side", self.side),
            ("arena.wheel_speed", self.wheel_speed),
            ("arena.axle_length", self.axle_length),
            ("arena.dt", self.dt),
            ("arena.start_radius", self.start_radius),
        ];
        for (field, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(field, format!("{v} must be finite and > 0")));
            }
        }
        if !(self.robot_radius > 0.0 && 2.0 * self.robot_radius < self.side) {
            return Err(Error::param(
                "arena.robot_radius",
                format!("{} must be in (0, side/2)", self.robot_radius),
            ));
        }
        let on_corner = |c: f64| c == 0.0 || c == self.side;
        if !(on_corner(self.light.x) && on_corner(self.light.y)) {
            return Err(Error::param(
                "arena.light",
                format!(
                    "({}, {}) is not a corner of the {} m arena",
                    self.light.x, self.light.y, self.side
                ),
            ));
        }
        Ok(())
    }

    /// The corner diagonally opposite the light.
    pub fn start_corner(&self) -> Point {
        Point::new(self.side - self.light.x, self.side - self.light.y)
    }

    #[inline]
    fn clamp_position(&self, p: Point) -> Point {
        let lo = self.robot_radius;
        let hi = self.side - self.robot_radius;
        Point::new(p.x.clamp(lo, hi), p.y.clamp(lo, hi))
    }
}

/// Wrap an angle into (−π, π].
#[inline]
pub fn wrap_angle(a: f64) -> f64 {
    if a > -PI && a <= PI {
        return a;
    }
    if a > PI && a <= 3.0 * PI {
        let w = a - 2.0 * PI;
        return if w <= -PI { w + 2.0 * PI } else { w };
    }
    if a <= -PI && a > -3.0 * PI {
        let w = a + 2.0 * PI;
        return if w > PI { w - 2.0 * PI } else { w };
    }
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

/// Robot position and heading (counter-clockwise from the +x axis).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotPose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl RobotPose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        RobotPose {
            x,
            y,
            heading: wrap_angle(heading),
        }
    }

    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// Binary wheel levels; each wheel runs at zero or at `wheel_speed`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct WheelCommand {
    pub left: bool,
    pub right: bool,
}

impl WheelCommand {
    pub const STOP: WheelCommand = WheelCommand {
        left: false,
        right: false,
    };
    pub const FORWARD: WheelCommand = WheelCommand {
        left: true,
        right: true,
    };

    pub fn new(left: bool, right: bool) -> Self {
        WheelCommand { left, right }
    }

    pub fn all() -> [WheelCommand; 4] {
        [
            WheelCommand::new(false, false),
            WheelCommand::new(false, true),
            WheelCommand::new(true, false),
            WheelCommand::new(true, true),
        ]
    }
}

/// Sector (1..=8) for a bearing measured clockwise from the heading.
///
/// Sector 1 is the π/4 wedge centred on the heading; numbering runs
/// clockwise. A bearing exactly on a wedge boundary belongs to the
/// clockwise-next sector.
#[inline]
pub fn sector_for_bearing(clockwise_bearing: f64) -> u8 {
    let b = wrap_angle(clockwise_bearing);
    let idx = ((b + FRAC_PI_8) / FRAC_PI_4).floor() as i64;
    (idx.rem_euclid(8) + 1) as u8
}

/// Clockwise angle from the robot heading to the direction of `target`.
pub fn clockwise_bearing(pose: &RobotPose, target: &Point) -> Result<f64> {
    let dx = target.x - pose.x;
    let dy = target.y - pose.y;
    if dx == 0.0 && dy == 0.0 {
        return Err(Error::Contract(
            "robot coincides with the light; bearing undefined".into(),
        ));
    }
    Ok(wrap_angle(pose.heading - dy.atan2(dx)))
}

/// Robot-relative light sector, 1 (dead ahead) to 8, clockwise.
pub fn light_sector(pose: &RobotPose, light: &Point) -> Result<u8> {
    clockwise_bearing(pose, light).map(sector_for_bearing)
}

/// Differential-drive update over one control step, followed by wall
/// clamping (the robot slides along walls, it does not bounce).
pub fn apply_command(pose: &RobotPose, cmd: WheelCommand, cfg: &ArenaConfig) -> RobotPose {
    let l = cmd.left as u8 as f64;
    let r = cmd.right as u8 as f64;
    let v = cfg.wheel_speed * (l + r) / 2.0;
    let omega = cfg.wheel_speed * (r - l) / cfg.axle_length;
    if v == 0.0 && omega == 0.0 {
        return *pose;
    }
    let (sin, cos) = pose.heading.sin_cos();
    let p = cfg.clamp_position(Point::new(
        pose.x + v * cfg.dt * cos,
        pose.y + v * cfg.dt * sin,
    ));
    RobotPose {
        x: p.x,
        y: p.y,
        heading: if omega == 0.0 {
            pose.heading
        } else {
            wrap_angle(pose.heading + omega * cfg.dt)
        },
    }
}

/// Rotate the robot in place by `angle` radians.
pub fn apply_perturbation(pose: &RobotPose, angle: f64) -> RobotPose {
    RobotPose {
        heading: wrap_angle(pose.heading + angle),
        ..*pose
    }
}

/// Direction of travel relative to the light over one step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepLabel {
    Toward,
    Away,
    Neither,
}

impl StepLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            StepLabel::Toward => "toward",
            StepLabel::Away => "away",
            StepLabel::Neither => "neither",
        }
    }
}

/// Toward iff the distance to the light strictly decreased, away iff it
/// strictly increased.
pub fn step_label(prev: &RobotPose, cur: &RobotPose, light: &Point) -> StepLabel {
    let before = prev.position().distance_sq(light);
    let after = cur.position().distance_sq(light);
    if after < before {
        StepLabel::Toward
    } else if after > before {
        StepLabel::Away
    } else {
        StepLabel::Neither
    }
}

/// Training stage a trial belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    /// No clap; the whole episode is phototaxis.
    PhototaxisOnly,
    /// Phototaxis until the clap, antiphototaxis afterwards.
    Full,
}

impl Stage {
    pub fn as_str(&self) -> &'static str {
        match self {
            Stage::PhototaxisOnly => "phototaxis_only",
            Stage::Full => "full",
        }
    }
}

/// One evaluation episode.
///
/// Steps are numbered `1..=horizon`. For phototaxis-only trials
/// `clap_step` equals `horizon` and no clap is emitted.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub start: RobotPose,
    pub horizon: usize,
    pub clap_step: usize,
    pub perturb_step: usize,
    pub perturb_angle: f64,
    pub stage: Stage,
}

impl TrialSpec {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::param("horizon", "must be at least 1"));
        }
        match self.stage {
            Stage::Full if !(1..self.horizon).contains(&self.clap_step) => {
                return Err(Error::param(
                    "clap_step",
                    format!("{} not in [1, {})", self.clap_step, self.horizon),
                ))
            }
            Stage::PhototaxisOnly if self.clap_step != self.horizon => {
                return Err(Error::param(
                    "clap_step",
                    format!(
                        "phototaxis-only trial must have clap_step = horizon = {}",
                        self.horizon
                    ),
                ))
            }
            _ => {}
        }
        if !(1..=self.horizon).contains(&self.perturb_step) {
            return Err(Error::param(
                "perturb_step",
                format!("{} not in [1, {}]", self.perturb_step, self.horizon),
            ));
        }
        if !(-PI..=PI).contains(&self.perturb_angle) {
            return Err(Error::param(
                "perturb_angle",
                format!("{} not in [-pi, pi]", self.perturb_angle),
            ));
        }
        Ok(())
    }

    /// Draw a trial from `seed`: start pose in the quarter disc around the
    /// corner opposite the light, uniform heading, clap step uniform in
    /// `clap_window` (full stage only), perturbation step uniform in
    /// `1..=horizon` and angle uniform in [−π, π].
    ///
    /// Draws happen in the same order for both stages, so trials built from
    /// the same seed share start pose and perturbation angle.
    pub fn generate(
        seed: u64,
        stage: Stage,
        horizon: usize,
        clap_window: (usize, usize),
        arena: &ArenaConfig,
    ) -> TrialSpec {
        let mut rng = seed::rng(seed);
        let corner = arena.start_corner();
        let sx = if corner.x == 0.0 { 1.0 } else { -1.0 };
        let sy = if corner.y == 0.0 { 1.0 } else { -1.0 };
        let radius = arena.start_radius * rng.gen::<f64>().sqrt();
        let theta = rng.gen_range(0.0..=std::f64::consts::FRAC_PI_2);
        let pos = arena.clamp_position(Point::new(
            corner.x + sx * radius * theta.cos(),
            corner.y + sy * radius * theta.sin(),
        ));
        let heading = wrap_angle(rng.gen_range(-PI..PI));
        let clap = rng.gen_range(clap_window.0..=clap_window.1);
        let perturb_step = rng.gen_range(1..=horizon);
        let perturb_angle = rng.gen_range(-PI..=PI);
        TrialSpec {
            start: RobotPose {
                x: pos.x,
                y: pos.y,
                heading,
            },
            horizon,
            clap_step: match stage {
                Stage::Full => clap,
                Stage::PhototaxisOnly => horizon,
            },
            perturb_step,
            perturb_angle,
            stage,
        }
    }
}

/// Sound sensor reading at step `t`: a one-step pulse at the clap.
pub fn sound_value(t: usize, spec: &TrialSpec) -> bool {
    spec.stage == Stage::Full && t == spec.clap_step
}
