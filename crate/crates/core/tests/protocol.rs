//! Wire-level behaviour of the decision server.

use std::io::{Read, Write};
use std::net::{SocketAddr, TcpStream};
use std::thread;
use std::time::Duration;

use avkg::graphio::protocol::{parse_decide_response, read_frame, write_frame, Client, Server, MAX_FRAME};
use avkg::graphio::{segment, serialize_segment};
use avkg::ontology::{build_graph, catalog};
use avkg::reasoner::{Decision, Reasoner};
use proptest::prelude::*;

fn start() -> SocketAddr {
    let server = Server::bind("127.0.0.1:0", Reasoner::from_catalog(&catalog())).unwrap();
    let addr = server.local_addr().unwrap();
    server.spawn();
    addr
}

fn raw(addr: SocketAddr) -> TcpStream {
    let s = TcpStream::connect(addr).unwrap();
    s.set_read_timeout(Some(Duration::from_secs(5))).unwrap();
    s
}

#[test]
fn documented_exchanges() {
    let mut c = Client::connect(start()).unwrap();
    assert_eq!(c.request("PING").unwrap(), "OK PONG");
    let r = c.request("DECIDE plastic_chair RESTRICTED").unwrap();
    assert!(r.starts_with("OK SUDDEN_BRAKE TRACE "), "{r}");
    assert_eq!(c.request("DECIDE unicorn FEASIBLE").unwrap(), "ERR UNKNOWN_OBSTACLE unicorn");
}

#[test]
fn decide_response_parses_into_a_path() {
    let mut c = Client::connect(start()).unwrap();
    let (d, trace) = parse_decide_response(&c.decide("shopping_cart", true).unwrap()).unwrap();
    assert_eq!(d, Decision::LaneChange);
    assert_eq!(trace.first().map(String::as_str), Some("in:shopping_cart"));
    assert_eq!(trace.last().map(String::as_str), Some("out:lane_change"));
}

#[test]
fn bad_requests_are_answered_and_the_connection_stays_open() {
    let mut c = Client::connect(start()).unwrap();
    for bad in ["", "ping", "DECIDE", "DECIDE cone MAYBE", "DECIDE a b c", "PUT_SEGMENT x 2", "COMMIT now"] {
        let r = c.request(bad).unwrap();
        assert!(r.starts_with("ERR BAD_REQUEST"), "`{bad}` -> {r}");
    }
    assert_eq!(c.request("PING").unwrap(), "OK PONG");
}

#[test]
fn commit_without_all_segments_is_incomplete() {
    let addr = start();
    let mut c = Client::connect(addr).unwrap();
    assert_eq!(c.request("COMMIT").unwrap(), "ERR INCOMPLETE_SEGMENTS");

    let segs = segment(&build_graph(&catalog()), 10);
    for s in &segs[..segs.len() - 1] {
        assert_eq!(c.put_segment(s).unwrap(), format!("OK STORED {}", s.index));
    }
    assert_eq!(c.request("COMMIT").unwrap(), "ERR INCOMPLETE_SEGMENTS");

    // Staging is shared: another connection can finish the upload.
    let mut other = Client::connect(addr).unwrap();
    other.put_segment(segs.last().unwrap()).unwrap();
    let g = build_graph(&catalog());
    assert_eq!(c.request("COMMIT").unwrap(), format!("OK GRAPH {} {}", g.node_count(), g.edge_count()));
    // A second commit has nothing staged.
    assert_eq!(c.request("COMMIT").unwrap(), "ERR INCOMPLETE_SEGMENTS");
}

#[test]
fn segment_header_must_match_body() {
    let mut c = Client::connect(start()).unwrap();
    let segs = segment(&build_graph(&catalog()), 20);
    let body = serialize_segment(&segs[1]);
    let r = c.exchange(&[b"PUT_SEGMENT 0 3", body.as_bytes()]).unwrap();
    assert!(r.starts_with("ERR BAD_REQUEST"), "{r}");
    let r = c.exchange(&[b"PUT_SEGMENT 0 3", b"not a segment"]).unwrap();
    assert!(r.starts_with("ERR BAD_REQUEST"), "{r}");
    assert_eq!(c.request("PING").unwrap(), "OK PONG");
}

#[test]
fn a_graph_that_fails_validation_is_not_committed() {
    let mut c = Client::connect(start()).unwrap();
    // One segment holding a lone input node: reconstructs, but has no outputs.
    let body = "KGSEG v1 0 1\nNODE in:x input X\n";
    assert_eq!(c.exchange(&[b"PUT_SEGMENT 0 1", body.as_bytes()]).unwrap(), "OK STORED 0");
    let r = c.request("COMMIT").unwrap();
    assert!(r.starts_with("ERR BAD_REQUEST"), "{r}");
    // The original graph is still active.
    assert!(c.decide("gnome", true).unwrap().starts_with("OK PROCEED"));
}

#[test]
fn oversized_frame_closes_after_one_error() {
    let addr = start();
    let mut s = raw(addr);
    s.write_all(&((MAX_FRAME + 1) as u32).to_be_bytes()).unwrap();
    assert_eq!(read_frame(&mut s).unwrap().unwrap(), b"ERR FRAME_TOO_LARGE");
    assert!(read_frame(&mut s).unwrap().is_none());
    assert_eq!(Client::connect(addr).unwrap().request("PING").unwrap(), "OK PONG");
}

#[test]
fn frame_at_the_limit_is_accepted() {
    let mut s = raw(start());
    write_frame(&mut s, &vec![b'x'; MAX_FRAME]).unwrap();
    let r = String::from_utf8(read_frame(&mut s).unwrap().unwrap()).unwrap();
    assert!(r.starts_with("ERR BAD_REQUEST") && r.len() < 1024, "{} bytes", r.len());
}

#[test]
fn truncated_frame_closes_quietly() {
    let addr = start();
    let mut s = raw(addr);
    s.write_all(&[0, 0, 0, 9, b'P', b'I']).unwrap();
    s.shutdown(std::net::Shutdown::Write).unwrap();
    let mut rest = Vec::new();
    s.read_to_end(&mut rest).unwrap();
    assert!(rest.is_empty());
    assert_eq!(Client::connect(addr).unwrap().request("PING").unwrap(), "OK PONG");
}

#[test]
fn requests_are_answered_in_order() {
    let mut s = raw(start());
    let requests = ["PING", "DECIDE gnome FEASIBLE", "bogus", "DECIDE plastic_chair RESTRICTED"];
    for r in requests {
        write_frame(&mut s, r.as_bytes()).unwrap();
    }
    let replies: Vec<String> =
        (0..requests.len()).map(|_| String::from_utf8(read_frame(&mut s).unwrap().unwrap()).unwrap()).collect();
    assert_eq!(replies[0], "OK PONG");
    assert!(replies[1].starts_with("OK PROCEED"));
    assert!(replies[2].starts_with("ERR BAD_REQUEST"));
    assert!(replies[3].starts_with("OK SUDDEN_BRAKE"));
}

#[test]
fn concurrent_clients_agree_with_local_decisions() {
    let addr = start();
    let cat = catalog();
    let local = Reasoner::from_catalog(&cat);
    let expected: Vec<(String, bool, String)> = cat
        .iter()
        .flat_map(|o| [true, false].map(|f| (o.id.clone(), f)))
        .map(|(id, f)| {
            let (d, t) = local.decide(&id, f).unwrap();
            let line = format!("OK {} TRACE {}", d.token(), t.joined());
            (id, f, line)
        })
        .collect();

    let workers: Vec<_> = (0..8)
        .map(|w| {
            let expected = expected.clone();
            thread::spawn(move || {
                let mut c = Client::connect(addr).unwrap();
                for round in 0..5 {
                    for (i, (id, f, line)) in expected.iter().enumerate() {
                        if (i + w + round) % 3 == 0 {
                            assert_eq!(&c.decide(id, *f).unwrap(), line);
                        }
                    }
                }
            })
        })
        .collect();
    for w in workers {
        w.join().unwrap();
    }
}

#[test]
fn commits_swap_while_readers_run() {
    let addr = start();
    let g = build_graph(&catalog());
    let segs = segment(&g, 7);
    let reader = thread::spawn(move || {
        let mut c = Client::connect(addr).unwrap();
        for _ in 0..200 {
            // Every graph ever active is the catalog graph, so answers never change.
            assert!(c.decide("plastic_chair", false).unwrap().starts_with("OK SUDDEN_BRAKE"));
        }
    });
    let mut w = Client::connect(addr).unwrap();
    for _ in 0..5 {
        for s in &segs {
            w.put_segment(s).unwrap();
        }
        assert!(w.request("COMMIT").unwrap().starts_with("OK GRAPH"));
    }
    reader.join().unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Arbitrary payloads get exactly one reply frame, and the server lives on.
    #[test]
    fn arbitrary_payloads_get_one_reply(payloads in prop::collection::vec(prop::collection::vec(any::<u8>(), 0..64), 1..6)) {
        let addr = start();
        let mut s = raw(addr);
        for p in &payloads {
            write_frame(&mut s, p).unwrap();
            let reply = read_frame(&mut s).unwrap();
            let reply = String::from_utf8(reply.expect("one reply per request")).unwrap();
            prop_assert!(reply.starts_with("OK ") || reply.starts_with("ERR "), "{}", reply);
            if p.starts_with(b"PUT_SEGMENT") && reply.starts_with("OK") {
                prop_assert!(false, "bare header stored a segment");
            }
        }
        prop_assert_eq!(Client::connect(addr).unwrap().request("PING").unwrap(), "OK PONG");
    }
}
