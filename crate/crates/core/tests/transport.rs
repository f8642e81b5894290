use std::thread;

use fpmpc::glm::{run_experiment, run_experiment_party_tcp, Experiment, ExperimentConfig};
use fpmpc::runtime::{run_parties_simulated, run_party_tcp, run_party_tcp_server, SessionConfig, TcpServer};
use fpmpc::{Error, NoiseSpec, Tensor};

fn short(exp: Experiment, parties: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(exp, 21);
    cfg.iterations = 40;
    cfg.n_parties = parties;
    cfg
}

fn over_tcp(cfg: &ExperimentConfig) -> Vec<fpmpc::glm::ExperimentReport> {
    let server = TcpServer::bind("127.0.0.1:0").unwrap();
    let addr = server.local_addr().unwrap().to_string();
    thread::scope(|s| {
        let hub = s.spawn(|| run_experiment_party_tcp(cfg, 0, &addr, Some(server)));
        let others: Vec<_> = (1..cfg.n_parties)
            .map(|p| {
                let addr = addr.clone();
                s.spawn(move || run_experiment_party_tcp(cfg, p, &addr, None))
            })
            .collect();
        let mut out = vec![hub.join().unwrap().unwrap()];
        out.extend(others.into_iter().map(|h| h.join().unwrap().unwrap()));
        out
    })
}

#[test]
fn tcp_matches_simulation_bit_for_bit() {
    for (exp, parties) in [(Experiment::Logit, 2), (Experiment::Poisson, 3), (Experiment::Multinomial2, 2)] {
        let cfg = short(exp, parties);
        let sim = run_experiment(&cfg).unwrap();
        for r in over_tcp(&cfg) {
            assert_eq!(r.weights, sim.weights, "{exp:?}");
            assert_eq!(r.bias, sim.bias);
            assert_eq!(r.rounds, sim.rounds);
        }
    }
}

#[test]
fn simulation_is_reproducible() {
    let cfg = short(Experiment::Probit, 2);
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn raw_program_over_tcp() {
    let cfg = SessionConfig::new(2, 5, NoiseSpec::default());
    let x = Tensor::column(vec![0.25, -0.5, 1.0]).unwrap();
    let program = |ctx: &mut fpmpc::runtime::PartyContext| {
        let mine = (ctx.party_id() == 0).then_some(&x);
        let s = ctx.share_input(0, mine, &[3, 1], 1.0, "x")?;
        ctx.reveal(&s)
    };
    let sim = run_parties_simulated(&cfg, program).unwrap();
    let server = TcpServer::bind("127.0.0.1:0").unwrap();
    let addr = server.local_addr().unwrap().to_string();
    let (a, b) = thread::scope(|s| {
        let h0 = s.spawn(|| run_party_tcp_server(&cfg, server, program));
        let h1 = s.spawn(|| run_party_tcp(&cfg, 1, &addr, program));
        (h0.join().unwrap().unwrap(), h1.join().unwrap().unwrap())
    });
    assert_eq!(a, sim[0]);
    assert_eq!(b, sim[1]);
    assert!(a.sub(&x).unwrap().max_abs() < 1e-10);
}

#[test]
fn missing_peer_times_out() {
    let mut cfg = SessionConfig::new(2, 1, NoiseSpec::default());
    cfg.timeout = std::time::Duration::from_millis(300);
    let server = TcpServer::bind("127.0.0.1:0").unwrap();
    let err = run_party_tcp_server(&cfg, server, |_| Ok(())).unwrap_err();
    assert!(matches!(err, Error::PeerUnreachable(_)), "{err}");
}
