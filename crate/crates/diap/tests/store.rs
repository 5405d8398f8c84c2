// SPDX-License-Identifier: Apache-2.0

use std::sync::Arc;

use diap::store::{ContentStore, StoreError};
use diap_core::{compute_cid, Cid, IpnsName, KeyPair};
use proptest::prelude::*;

fn stores() -> Vec<(ContentStore, Option<tempfile::TempDir>)> {
    let dir = tempfile::tempdir().unwrap();
    vec![
        (ContentStore::in_memory(), None),
        (ContentStore::open_dir(dir.path()).unwrap(), Some(dir)),
    ]
}

#[test]
fn put_get_round_trip_and_idempotence() {
    for (store, _dir) in stores() {
        let a = store.put(b"alpha").unwrap();
        let b = store.put(b"beta").unwrap();
        assert_eq!(store.put(b"alpha").unwrap(), a);
        assert_ne!(a, b);
        assert_eq!(store.get(&a).unwrap(), b"alpha");
        assert_eq!(store.get(&b).unwrap(), b"beta");
        assert_eq!(a, compute_cid(b"alpha"));
    }
}

#[test]
fn missing_cid_is_not_found() {
    for (store, _dir) in stores() {
        assert!(matches!(store.get(&compute_cid(b"nope")), Err(StoreError::NotFound)));
    }
}

#[test]
fn corrupted_block_is_an_integrity_violation() {
    for (store, _dir) in stores() {
        let cid = store.put(b"some document bytes").unwrap();
        store.corrupt_block(&cid, 3).unwrap();
        assert!(matches!(store.get(&cid), Err(StoreError::IntegrityViolation(c)) if c == cid));
        // Re-putting the original heals the block.
        store.put(b"some document bytes").unwrap();
        assert_eq!(store.get(&cid).unwrap(), b"some document bytes");
    }
}

#[test]
fn ipns_publish_resolve_update() {
    for (store, _dir) in stores() {
        let kp = KeyPair::from_seed(&[3; 32]);
        let name = IpnsName::for_key(&kp.public_key());
        assert!(matches!(store.ipns_resolve(&name), Err(StoreError::NotFound)));
        let one = store.put(b"v1").unwrap();
        let two = store.put(b"v2").unwrap();
        store.ipns_publish(&kp, one, 1).unwrap();
        assert_eq!(store.ipns_resolve(&name).unwrap(), one);
        assert!(matches!(
            store.ipns_publish(&kp, two, 1),
            Err(StoreError::StaleSequence { last: 1, attempted: 1, .. })
        ));
        store.ipns_publish(&kp, two, 2).unwrap();
        assert_eq!(store.ipns_resolve(&name).unwrap(), two);
    }
}

#[test]
fn tampered_record_signature_is_rejected() {
    for (store, _dir) in stores() {
        let kp = KeyPair::from_seed(&[4; 32]);
        let cid = store.put(b"doc").unwrap();
        let rec = store.ipns_publish(&kp, cid, 1).unwrap();
        store.corrupt_record_signature(&rec.name).unwrap();
        assert!(matches!(
            store.ipns_resolve(&rec.name),
            Err(StoreError::RecordSignatureInvalid)
        ));
    }
}

#[test]
fn ingest_rejects_forged_records() {
    let store = ContentStore::in_memory();
    let kp = KeyPair::from_seed(&[5; 32]);
    let mut rec = diap_core::IpnsRecord::sign(&kp, compute_cid(b"x"), 1);
    rec.sequence = 9;
    assert!(matches!(store.ipns_ingest(&rec), Err(StoreError::InvalidSignature)));
}

#[test]
fn directory_store_persists_across_instances() {
    let dir = tempfile::tempdir().unwrap();
    let kp = KeyPair::from_seed(&[6; 32]);
    let cid = {
        let s = ContentStore::open_dir(dir.path()).unwrap();
        let cid = s.put(b"persisted").unwrap();
        s.ipns_publish(&kp, cid, 1).unwrap();
        cid
    };
    let s = ContentStore::open_dir(dir.path()).unwrap();
    assert_eq!(s.get(&cid).unwrap(), b"persisted");
    assert_eq!(s.ipns_resolve(&IpnsName::for_key(&kp.public_key())).unwrap(), cid);
    assert!(dir.path().join("blocks").join(hex::encode(cid.digest())).exists());
}

#[test]
fn concurrent_publishes_keep_sequences_increasing() {
    let store = Arc::new(ContentStore::in_memory());
    let kp = Arc::new(KeyPair::from_seed(&[8; 32]));
    let cid = store.put(b"c").unwrap();
    let accepted: Vec<u64> = std::thread::scope(|s| {
        let handles: Vec<_> = (1..=64u64)
            .map(|seq| {
                let (store, kp) = (store.clone(), kp.clone());
                s.spawn(move || store.ipns_publish(&kp, cid, seq).ok().map(|r| r.sequence))
            })
            .collect();
        handles.into_iter().filter_map(|h| h.join().unwrap()).collect()
    });
    assert!(!accepted.is_empty());
    let name = IpnsName::for_key(&kp.public_key());
    assert_eq!(
        store.ipns_record(&name).unwrap().sequence,
        *accepted.iter().max().unwrap()
    );
    // Whatever order the threads ran in, a lower sequence never landed
    // after a higher one, so the final record is the maximum accepted.
    assert!(store.ipns_publish(&kp, cid, *accepted.iter().max().unwrap()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn get_after_put(blobs in proptest::collection::vec(proptest::collection::vec(any::<u8>(), 0..512), 1..8)) {
        let store = ContentStore::in_memory();
        let cids: Vec<Cid> = blobs.iter().map(|b| store.put(b).unwrap()).collect();
        for (b, c) in blobs.iter().zip(&cids) {
            let got = store.get(c).unwrap();
            prop_assert_eq!(&got, b);
            prop_assert_eq!(compute_cid(&got), *c);
        }
    }

    #[test]
    fn sequence_monotonic(seqs in proptest::collection::vec(1u64..20, 1..30)) {
        let store = ContentStore::in_memory();
        let kp = KeyPair::from_seed(&[9; 32]);
        let cid = store.put(b"v").unwrap();
        let mut last = 0;
        for s in seqs {
            let ok = store.ipns_publish(&kp, cid, s).is_ok();
            prop_assert_eq!(ok, s > last);
            if ok {
                last = s;
            }
        }
    }
}
