//! Each approximation evaluated on shares against the same routine on
//! plaintext, over 1000 inputs. At gamma = 1e5 every product on shares carries
//! absolute roundoff of order gamma^2 eps = 2e-6, so tolerances sit above that.

use fpmpc::approx::{
    cheb_eval_odd, exp_scaled, newton_invroot8, newton_invsqrt, newton_recip, newton_sgn, preset, relu,
    softmax_shifted, ExpConfig, NewtonConfig, SoftmaxConfig,
};
use fpmpc::arith::Public;
use fpmpc::runtime::{run_parties_simulated, PartyContext, SessionConfig};
use fpmpc::tensor::uniform;
use fpmpc::{NoiseSpec, RandomSource, Result, SecretTensor, Tensor};

fn both<F, G>(x: &Tensor, beta: f64, public: F, private: G) -> (Tensor, Tensor)
where
    F: Fn(&mut Public, &Tensor) -> Result<Tensor>,
    G: Fn(&mut PartyContext, &SecretTensor) -> Result<SecretTensor> + Sync,
{
    let want = public(&mut Public::new(), x).unwrap();
    let cfg = SessionConfig::new(2, 17, NoiseSpec::default());
    let got = run_parties_simulated(&cfg, |ctx| {
        let mine = (ctx.party_id() == 0).then_some(x);
        let s = ctx.share_input(0, mine, x.dims(), beta, "input")?;
        let y = private(ctx, &s)?;
        ctx.reveal(&y)
    })
    .unwrap();
    (want, got[0].clone())
}

fn inputs(lo: f64, hi: f64, seed: u64) -> Tensor {
    let mut rng = RandomSource::new(seed, 0);
    let u = uniform(&[1000], 0.5, &mut rng).unwrap();
    u.map(|v| lo + (v + 0.5) * (hi - lo)).unwrap()
}

fn max_rel(a: &Tensor, b: &Tensor) -> f64 {
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).abs() / x.abs().max(1.0))
        .fold(0.0, f64::max)
}

#[test]
fn sign_and_relu() {
    let cfg = NewtonConfig::new(60, 2.0).unwrap();
    // kept away from zero, where the scaled input is below the roundoff floor
    let mag = inputs(0.05, 1.0, 1);
    let signed = mag.data().iter().enumerate().map(|(i, v)| if i % 2 == 0 { *v } else { -v });
    let x = Tensor::new(vec![1000], signed.collect()).unwrap();
    let (p, s) = both(&x, 1.0, |e, x| newton_sgn(e, x, &cfg), |e, x| newton_sgn(e, x, &cfg));
    assert!(max_rel(&p, &s) < 1e-4, "{}", max_rel(&p, &s));
    let (p, s) = both(&x, 1.0, |e, x| relu(e, x, &cfg), |e, x| relu(e, x, &cfg));
    assert!(max_rel(&p, &s) < 1e-4, "relu {}", max_rel(&p, &s));
}

#[test]
fn reciprocal_and_roots() {
    let x = inputs(0.05, 1.0, 2);
    let (p, s) = both(&x, 1.0, |e, x| newton_recip(e, x, &NewtonConfig::recip()), |e, x| {
        newton_recip(e, x, &NewtonConfig::recip())
    });
    assert!(max_rel(&p, &s) < 1e-4, "recip {}", max_rel(&p, &s));
    let (p, s) = both(&x, 1.0, |e, x| newton_invsqrt(e, x, &NewtonConfig::invsqrt()), |e, x| {
        newton_invsqrt(e, x, &NewtonConfig::invsqrt())
    });
    assert!(max_rel(&p, &s) < 1e-4, "invsqrt {}", max_rel(&p, &s));
    let (p, s) = both(&x, 1.0, |e, x| newton_invroot8(e, x, &NewtonConfig::invroot8()), |e, x| {
        newton_invroot8(e, x, &NewtonConfig::invroot8())
    });
    assert!(max_rel(&p, &s) < 1e-4, "invroot8 {}", max_rel(&p, &s));
}

#[test]
fn chebyshev_series() {
    for name in ["logistic", "probit", "tanh"] {
        let series = preset(name).unwrap();
        let x = inputs(-series.z, series.z, 3);
        let (p, s) = both(&x, series.z, |e, x| cheb_eval_odd(e, &series, x), |e, x| cheb_eval_odd(e, &series, x));
        assert!(max_rel(&p, &s) < 1e-4, "{name} {}", max_rel(&p, &s));
    }
}

#[test]
fn exponential_and_softmax() {
    let x = inputs(-10.0, 0.0, 4);
    let cfg = ExpConfig::default();
    let (p, s) = both(&x, 10.0, |e, x| exp_scaled(e, x, &cfg), |e, x| exp_scaled(e, x, &cfg));
    assert!(max_rel(&p, &s) < 1e-4, "exp {}", max_rel(&p, &s));

    let x = inputs(-4.0, 4.0, 5).reshape(&[250, 4]).unwrap();
    let cfg = SoftmaxConfig::default();
    let (p, s) = both(&x, 4.0, |e, x| softmax_shifted(e, x, &cfg), |e, x| softmax_shifted(e, x, &cfg));
    // the reciprocal of the row sum amplifies roundoff in the exponentials
    assert!(max_rel(&p, &s) < 1e-3, "softmax {}", max_rel(&p, &s));
}
