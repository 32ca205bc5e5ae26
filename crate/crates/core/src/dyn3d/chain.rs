//! Chain kinematics, mass matrix, bias forces and the implicit step.
//!
//! Generalized velocity layout: `[v₀ (3), ω₀ (3), θ̇₁ … θ̇ₙ₋₁]` with the head's
//! linear and angular velocity expressed in the world frame.
//!
//! Link frame: origin at the link centre, +x toward the head, +z up when the
//! body lies flat. Joint `j` sits at `−L/2 x` of link `j−1` and `+L/2 x` of
//! link `j`; horizontal joints turn about z, vertical ones about y.

use nalgebra::{DMatrix, DVector, LU, Matrix3, Matrix3xX, UnitQuaternion, Vector2, Vector3};

use super::{ContactParams, Dyn3dSettings, FrictionParams, JointActuation};
use crate::config::{JointAxis, SnakeConfig};
use crate::error::DynError;

const NEWTON_TOL: f64 = 1e-13;
const NEWTON_MAX: usize = 30;

/// World-frame state of one link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkState {
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
    pub velocity: Vector3<f64>,
    pub angular_velocity: Vector3<f64>,
}

/// Mass and geometry of a chain of identical cylinders.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub n_links: usize,
    pub link_length: f64,
    pub link_mass: f64,
    inertia: Matrix3<f64>,
    axes: Vec<Vector3<f64>>,
}

impl Chain {
    pub fn new(n_links: usize, link_length: f64, link_mass: f64, radius: f64, axes: &[JointAxis]) -> Result<Self, DynError> {
        if n_links == 0 {
            return Err(DynError::Empty);
        }
        if axes.len() + 1 != n_links {
            return Err(DynError::Targets { got: axes.len(), expected: n_links - 1 });
        }
        let ixx = 0.5 * link_mass * radius * radius;
        let iyy = link_mass * (3.0 * radius * radius + link_length * link_length) / 12.0;
        Ok(Chain {
            n_links,
            link_length,
            link_mass,
            inertia: Matrix3::from_diagonal(&Vector3::new(ixx, iyy, iyy)),
            axes: axes
                .iter()
                .map(|a| match a {
                    JointAxis::Horizontal => Vector3::z(),
                    JointAxis::Vertical => Vector3::y(),
                })
                .collect(),
        })
    }

    pub fn from_snake(snake: &SnakeConfig) -> Result<Self, DynError> {
        Chain::new(snake.n_links, snake.link_length, snake.link_mass, snake.body_half_width, &snake.axes())
    }

    pub fn n_joints(&self) -> usize {
        self.n_links - 1
    }

    pub fn dof(&self) -> usize {
        self.n_links + 5
    }
}

/// Generalized coordinates and velocities.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub base_position: Vector3<f64>,
    pub base_orientation: UnitQuaternion<f64>,
    pub joint_angles: Vec<f64>,
    pub velocity: DVector<f64>,
    pub t: f64,
}

impl ChainState {
    /// Straight chain at rest along +x with the head centre at `head` and all
    /// links level.
    pub fn straight(chain: &Chain, head: Vector3<f64>) -> Self {
        ChainState {
            base_position: head,
            base_orientation: UnitQuaternion::identity(),
            joint_angles: vec![0.0; chain.n_joints()],
            velocity: DVector::zeros(chain.dof()),
            t: 0.0,
        }
    }
}

/// Per-link kinematic quantities for one configuration.
struct Kin {
    quat: Vec<UnitQuaternion<f64>>,
    rot: Vec<Matrix3<f64>>,
    pos: Vec<Vector3<f64>>,
    /// World joint positions and axes, index `j − 1` for joint `j`.
    jpos: Vec<Vector3<f64>>,
    jaxis: Vec<Vector3<f64>>,
    jv: Vec<Matrix3xX<f64>>,
    jw: Vec<Matrix3xX<f64>>,
    inertia_w: Vec<Matrix3<f64>>,
}

fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

impl Chain {
    fn kinematics(&self, s: &ChainState) -> Kin {
        let n = self.n_links;
        let dof = self.dof();
        let half = Vector3::new(self.link_length / 2.0, 0.0, 0.0);
        let mut quat = Vec::with_capacity(n);
        let mut pos = Vec::with_capacity(n);
        let mut jpos = Vec::with_capacity(n - 1);
        let mut jaxis = Vec::with_capacity(n - 1);
        quat.push(s.base_orientation);
        pos.push(s.base_position);
        for j in 1..n {
            let parent = quat[j - 1];
            let c = pos[j - 1] - parent * half;
            let q = parent * UnitQuaternion::from_scaled_axis(self.axes[j - 1] * s.joint_angles[j - 1]);
            jaxis.push(parent * self.axes[j - 1]);
            jpos.push(c);
            pos.push(c - q * half);
            quat.push(q);
        }
        let rot: Vec<Matrix3<f64>> = quat.iter().map(|q| *q.to_rotation_matrix().matrix()).collect();
        let inertia_w = rot.iter().map(|r| r * self.inertia * r.transpose()).collect();
        let mut jv = Vec::with_capacity(n);
        let mut jw = Vec::with_capacity(n);
        for i in 0..n {
            let mut v = Matrix3xX::zeros(dof);
            let mut w = Matrix3xX::zeros(dof);
            v.fixed_columns_mut::<3>(0).copy_from(&Matrix3::identity());
            v.fixed_columns_mut::<3>(3).copy_from(&(-skew(&(pos[i] - pos[0]))));
            w.fixed_columns_mut::<3>(3).copy_from(&Matrix3::identity());
            for j in 1..=i {
                let a = jaxis[j - 1];
                v.set_column(5 + j, &a.cross(&(pos[i] - jpos[j - 1])));
                w.set_column(5 + j, &a);
            }
            jv.push(v);
            jw.push(w);
        }
        Kin { quat, rot, pos, jpos, jaxis, jv, jw, inertia_w }
    }

    fn mass_matrix(&self, k: &Kin) -> DMatrix<f64> {
        let dof = self.dof();
        let mut h = DMatrix::zeros(dof, dof);
        for i in 0..self.n_links {
            h += k.jv[i].transpose() * &k.jv[i] * self.link_mass;
            h += k.jw[i].transpose() * (k.inertia_w[i] * &k.jw[i]);
        }
        // exact symmetry keeps the factorization deterministic
        let ht = h.transpose();
        (h + ht) * 0.5
    }

    /// Velocity-product and gravity terms: returns `Q_g − C(q, u)`.
    fn explicit_forces(&self, k: &Kin, u: &DVector<f64>, gravity: f64) -> DVector<f64> {
        let n = self.n_links;
        let m = self.link_mass;
        let mut q = DVector::zeros(self.dof());
        let mut w = Vector3::new(u[3], u[4], u[5]);
        let mut alpha = Vector3::zeros();
        let mut acc = Vector3::zeros();
        let g = Vector3::new(0.0, 0.0, -m * gravity);
        for i in 0..n {
            if i > 0 {
                let wp = w;
                let rel = k.jaxis[i - 1] * u[5 + i];
                w = wp + rel;
                let r1 = k.jpos[i - 1] - k.pos[i - 1];
                let r2 = k.pos[i] - k.jpos[i - 1];
                let alpha_new = alpha + wp.cross(&rel);
                acc += alpha.cross(&r1) + wp.cross(&wp.cross(&r1)) + alpha_new.cross(&r2) + w.cross(&w.cross(&r2));
                alpha = alpha_new;
            }
            let lin = g - acc * m;
            let iw = k.inertia_w[i];
            let ang = -(iw * alpha + w.cross(&(iw * w)));
            q += k.jv[i].transpose() * lin + k.jw[i].transpose() * ang;
        }
        q
    }
}

/// Forces on one link during the last step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactReport {
    pub normal: f64,
    pub friction: Vector2<f64>,
    /// Link-centre velocity at the end of the step.
    pub velocity: Vector3<f64>,
}

/// A chain, its parameters and its evolving state.
#[derive(Debug, Clone)]
pub struct Dyn3dSim {
    pub chain: Chain,
    pub state: ChainState,
    contact: ContactParams,
    friction: FrictionParams,
    servo: JointActuation,
    gravity: f64,
    dt: f64,
    v_blowup: f64,
    last_contacts: Vec<ContactReport>,
    newton_iterations: usize,
}

struct LinkTerms {
    f: Vector3<f64>,
    /// `−∂f/∂v`.
    k: Matrix3<f64>,
}

impl Dyn3dSim {
    pub fn new(chain: Chain, state: ChainState, settings: &Dyn3dSettings) -> Result<Self, DynError> {
        let bound = settings.stability_bound(chain.link_mass);
        if !(settings.dt > 0.0 && settings.dt <= bound) {
            return Err(DynError::Unstable { dt: settings.dt, bound });
        }
        let n = chain.n_links;
        Ok(Dyn3dSim {
            chain,
            state,
            contact: settings.contact(),
            friction: settings.friction(),
            servo: settings.actuation(),
            gravity: settings.gravity,
            dt: settings.dt,
            v_blowup: settings.v_blowup,
            last_contacts: vec![
                ContactReport { normal: 0.0, friction: Vector2::zeros(), velocity: Vector3::zeros() };
                n
            ],
            newton_iterations: 0,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn last_contacts(&self) -> &[ContactReport] {
        &self.last_contacts
    }

    /// Newton iterations used by the most recent step.
    pub fn newton_iterations(&self) -> usize {
        self.newton_iterations
    }

    pub fn link_states(&self) -> Vec<LinkState> {
        let k = self.chain.kinematics(&self.state);
        let u = &self.state.velocity;
        (0..self.chain.n_links)
            .map(|i| LinkState {
                position: k.pos[i],
                orientation: k.quat[i],
                velocity: &k.jv[i] * u,
                angular_velocity: &k.jw[i] * u,
            })
            .collect()
    }

    /// Kinetic + gravitational + contact-spring + servo-spring energy. The
    /// servo term is measured against `targets` when given.
    pub fn energy(&self, targets: Option<&[f64]>) -> f64 {
        let k = self.chain.kinematics(&self.state);
        let u = &self.state.velocity;
        let h = self.chain.mass_matrix(&k);
        let kinetic = 0.5 * u.dot(&(&h * u));
        let m = self.chain.link_mass;
        let mut potential = 0.0;
        for p in &k.pos {
            potential += m * self.gravity * p.z;
            let pen = p.z.min(0.0);
            potential += 0.5 * self.contact.k_spring * pen * pen;
        }
        for (j, th) in self.state.joint_angles.iter().enumerate() {
            let target = targets.map_or(0.0, |t| t[j]);
            potential += 0.5 * self.servo.kp * (th - target).powi(2);
        }
        kinetic + potential
    }

    /// Total linear and angular momentum (about the world origin).
    pub fn momentum(&self) -> (Vector3<f64>, Vector3<f64>) {
        let m = self.chain.link_mass;
        let k = self.chain.kinematics(&self.state);
        let mut p = Vector3::zeros();
        let mut l = Vector3::zeros();
        for (i, ls) in self.link_states().iter().enumerate() {
            p += ls.velocity * m;
            l += ls.position.cross(&(ls.velocity * m)) + k.inertia_w[i] * ls.angular_velocity;
        }
        (p, l)
    }

    fn link_terms(&self, k: &Kin, i: usize, v: &Vector3<f64>, fn_explicit: f64) -> LinkTerms {
        let dt = self.dt;
        let cp = &self.contact;
        let z0 = k.pos[i].z;
        let mut f = Vector3::zeros();
        let mut kk = Matrix3::zeros();

        // normal: spring evaluated at the end-of-step height, damping only
        // once the link is already in contact
        let zeta = z0 + dt * v.z;
        if zeta < 0.0 {
            let damp = if z0 < 0.0 { cp.d_damp } else { 0.0 };
            let fz = -cp.k_spring * zeta - damp * v.z;
            if fz > 0.0 {
                f.z = fz;
                kk[(2, 2)] = cp.k_spring * dt + damp;
            }
        }

        if fn_explicit > 0.0 {
            let fp = &self.friction;
            let ax = k.rot[i].column(0);
            let planar = Vector2::new(ax.x, ax.y);
            let len = planar.norm();
            let l = if len > 1e-12 { planar / len } else { Vector2::new(1.0, 0.0) };
            let t = Vector2::new(-l.y, l.x);
            let vp = Vector2::new(v.x, v.y);
            let speed = vp.norm();
            let denom = speed + fp.eps_v;
            let m = l * l.transpose() * fp.mu_t + t * t.transpose() * fp.mu_n;
            let mv = m * vp;
            let fr = -mv * (fn_explicit / denom);
            f.x += fr.x;
            f.y += fr.y;
            let dir = if speed > 0.0 { vp / speed } else { Vector2::zeros() };
            let block = (m / denom - mv * dir.transpose() / (denom * denom)) * fn_explicit;
            kk.fixed_view_mut::<2, 2>(0, 0).copy_from(&block);
        }
        LinkTerms { f, k: kk }
    }

    fn servo_torque(&self, j: usize, rate: f64, target: f64) -> (f64, f64) {
        let sv = &self.servo;
        let th = self.state.joint_angles[j] + self.dt * rate;
        let raw = sv.kp * (target - th) - sv.kd * rate;
        if raw.abs() <= sv.torque_limit {
            (raw, sv.kp * self.dt + sv.kd)
        } else {
            (raw.clamp(-sv.torque_limit, sv.torque_limit), 0.0)
        }
    }

    /// Residual `G(u)` of the implicit step and, optionally, its Jacobian.
    fn residual(
        &self,
        k: &Kin,
        h: &DMatrix<f64>,
        q0: &DVector<f64>,
        fn0: &[f64],
        targets: &[f64],
        u: &DVector<f64>,
        with_jac: bool,
    ) -> (DVector<f64>, Option<DMatrix<f64>>) {
        let dt = self.dt;
        let u0 = &self.state.velocity;
        let mut q = q0.clone();
        let mut jac = with_jac.then(|| h.clone());
        for i in 0..self.chain.n_links {
            let v = &k.jv[i] * u;
            let terms = self.link_terms(k, i, &v, fn0[i]);
            q += k.jv[i].transpose() * terms.f;
            if let Some(j) = jac.as_mut() {
                if terms.k != Matrix3::zeros() {
                    *j += k.jv[i].transpose() * (terms.k * &k.jv[i]) * dt;
                }
            }
        }
        for (jn, &target) in targets.iter().enumerate() {
            let (tau, d) = self.servo_torque(jn, u[6 + jn], target);
            q[6 + jn] += tau;
            if let Some(j) = jac.as_mut() {
                j[(6 + jn, 6 + jn)] += d * dt;
            }
        }
        let g = h * (u - u0) - q * dt;
        (g, jac)
    }

    /// Advances one step toward joint `targets` (the commanded angles at the
    /// end of the step).
    pub fn step(&mut self, targets: &[f64]) -> Result<(), DynError> {
        let nj = self.chain.n_joints();
        if targets.len() != nj {
            return Err(DynError::Targets { got: targets.len(), expected: nj });
        }
        let k = self.chain.kinematics(&self.state);
        let h = self.chain.mass_matrix(&k);
        let u0 = self.state.velocity.clone();
        let q0 = self.chain.explicit_forces(&k, &u0, self.gravity);
        let cp = self.contact;
        let fn0: Vec<f64> = (0..self.chain.n_links)
            .map(|i| {
                let vz = (k.jv[i].row(2) * &u0)[0];
                super::normal_force(k.pos[i].z, vz, &cp)
            })
            .collect();

        let mut u = u0.clone();
        let (mut g, mut jac) = self.residual(&k, &h, &q0, &fn0, targets, &u, true);
        let mut gnorm = g.norm();
        let scale = 1.0 + u0.amax();
        let mut iters = 0;
        while iters < NEWTON_MAX {
            iters += 1;
            let lu = LU::new(jac.take().expect("jacobian requested"));
            let Some(delta) = lu.solve(&g) else { break };
            let mut lambda = 1.0;
            let mut accepted = false;
            for _ in 0..12 {
                let trial = &u - &delta * lambda;
                let (gt, jt) = self.residual(&k, &h, &q0, &fn0, targets, &trial, true);
                let gtn = gt.norm();
                if gtn < gnorm || lambda < 1e-3 {
                    u = trial;
                    g = gt;
                    jac = jt;
                    gnorm = gtn;
                    accepted = true;
                    break;
                }
                lambda *= 0.5;
            }
            if !accepted || delta.amax() * lambda <= NEWTON_TOL * scale {
                break;
            }
        }
        self.newton_iterations = iters;

        for i in 0..self.chain.n_links {
            let v = &k.jv[i] * &u;
            let terms = self.link_terms(&k, i, &v, fn0[i]);
            let fr = Vector2::new(terms.f.x, terms.f.y);
            self.last_contacts[i] = ContactReport { normal: terms.f.z, friction: fr, velocity: v };
        }

        let dt = self.dt;
        let s = &mut self.state;
        s.base_position += Vector3::new(u[0], u[1], u[2]) * dt;
        let w = Vector3::new(u[3], u[4], u[5]);
        s.base_orientation = UnitQuaternion::from_scaled_axis(w * dt) * s.base_orientation;
        s.base_orientation.renormalize();
        for (j, th) in s.joint_angles.iter_mut().enumerate() {
            *th += dt * u[6 + j];
        }
        s.velocity = u;
        s.t += dt;

        for (i, c) in self.last_contacts.iter().enumerate() {
            let speed = c.velocity.norm();
            if !(speed <= self.v_blowup) {
                return Err(DynError::Blowup { time: self.state.t, link: i, speed });
            }
        }
        Ok(())
    }
}
