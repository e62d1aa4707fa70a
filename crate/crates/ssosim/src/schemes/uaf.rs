//! FIDO UAF driver (attested and non-attested authenticators).
//!
//! The authenticator on the user's device is a local IdP holding one key pair
//! per SP account; a PIN (or biometric) unlocks it and the SP verifies the
//! challenge signature against the enrolled public key — entirely locally,
//! with no remote party anywhere.
//!
//! Attested authenticators keep keys in certified hardware: the certification
//! authority signs the attestation key at provisioning, per-SP public keys
//! arrive under the attestation chain, and private keys cannot leave the
//! device (which also rules out migrating them to a new one). Non-attested
//! authenticators are software: keys are extractable, certificates
//! self-signed, and the chain conveys nothing an SP could vet.

use crate::terms::{SecretClass, SecretId, Term};
use crate::world::{Annotation, Channel, PrincipalId, Role, Scope};

use super::helpers::*;
use super::*;

pub struct Uaf {
    pub attested: bool,
}

fn sp_key_name(user: &PrincipalId, sp: &PrincipalId, device: &PrincipalId) -> String {
    format!("uafkey.{user}.{sp}.{device}")
}

impl Uaf {
    fn enroll(
        &self,
        run: &mut Run,
        device: &PrincipalId,
        sp: &PrincipalId,
        annotation: Annotation,
    ) -> Result<(), crate::world::WorldError> {
        let user = run.dep.user.clone();
        let keyname = sp_key_name(&user, sp, device);
        // Hardware-held for attested authenticators, extractable software
        // keys otherwise.
        let (sk, pk) = run.world.key_pair(&device.clone(), &keyname, !self.attested);
        run.world.put(device, &keyname, sk, Scope::User(user.clone()));

        let cert = if self.attested {
            let att_sk = run.world.store_term(device, "attestation-key").cloned().unwrap();
            Term::sign(
                att_sk,
                Term::list(&[pk.clone(), Term::atom("model42"), Term::pair(Term::atom("loa"), Term::atom("pin"))]),
            )
        } else {
            let id = SecretId::new(keyname.clone());
            Term::sign(Term::PrivKey(id), pk.clone())
        };
        let fido_cert = run.world.store_term(device, "attestation-cert").cloned();
        let bundle = match fido_cert {
            Some(fc) if self.attested => Term::list(&[pk.clone(), cert, fc]),
            _ => Term::pair(pk.clone(), cert),
        };
        run.world.send(Channel::web(device, sp), bundle.clone(), annotation)?;
        run.world
            .put(sp, &format!("enrolled:{}:{device}", user), bundle, Scope::User(user.clone()));
        run.world
            .put(sp, &format!("account:{user}"), pk.clone(), Scope::User(user.clone()));
        put_account_ids(&mut run.world, sp, &user, pk);
        Ok(())
    }
}

impl SchemeDriver for Uaf {
    fn name(&self) -> SchemeName {
        if self.attested {
            SchemeName::UafAttested
        } else {
            SchemeName::UafNonAttested
        }
    }

    fn descriptor(&self) -> SchemeDescriptor {
        SchemeDescriptor {
            name: self.name(),
            coords: Coords {
                association: if self.attested { Association::A6 } else { Association::A5 },
                conveyance: Conveyance::G1,
                verification: Verification::C2,
                auth_type: AuthType::T2b,
                multi_device: MultiDevice::M3,
            },
            optional_features: vec![],
        }
    }

    fn deploy(&self, cfg: &DeployConfig) -> Result<Run, SchemeError> {
        if cfg.sps == 0 {
            return Err(SchemeError::InvalidConfig("need at least one SP".into()));
        }
        let (mut w, mut dep) = base_world(cfg, self.name());
        let user = dep.user.clone();
        let dev = dep.primary_device().clone();
        dep.home_idp = dev.clone(); // the authenticator is the IdP

        let pin = w.weak_secret(&user, &format!("pin.{user}"));
        w.put(&dev, "pin-check", Term::hash(pin.clone()), Scope::User(user.clone()));
        w.put(&user, "pin", pin, Scope::User(user.clone()));

        if self.attested {
            // Certification: the authority signs the authenticator model's
            // attestation key; SPs hold the authority's root.
            let fido = w.add_principal("fido", Role::FederationOperator, None);
            dep.operator = Some(fido.clone());
            let (root_sk, root_pk) = w.key_pair(&fido.clone(), "fidoroot", true);
            w.put(&fido, "signing-key", root_sk.clone(), Scope::Server);
            w.make_public(root_pk);
            let (att_sk, att_pk) = w.key_pair(&dev.clone(), "attkey.model42", false);
            w.put(&dev, "attestation-key", att_sk, Scope::User(user.clone()));
            let _ = w.send(
                Channel::web(&dev, &fido),
                Term::pair(Term::atom("certification-request"), att_pk.clone()),
                Annotation::ManualRegistration,
            );
            let cert = Term::sign(root_sk, Term::pair(Term::atom("model42"), att_pk));
            w.put(&fido, "vetted:model42", cert.clone(), Scope::Server);
            let _ = w.send(Channel::web(&fido, &dev), cert.clone(), Annotation::None);
            w.put(&dev, "attestation-cert", cert, Scope::User(user.clone()));
        }

        // Register the primary device with every SP account.
        let mut run = Run { world: w, dep };
        for sp in run.dep.sps.clone() {
            self.enroll(&mut run, &dev, &sp, Annotation::DeviceSetup)
                .map_err(SchemeError::from)?;
        }
        Ok(run)
    }

    fn register_sp(&self, _run: &mut Run, _sp: &PrincipalId) -> Vec<TraceEvent> {
        Vec::new() // SPs need only the root certificate, no sponsorship
    }

    fn setup_device(&self, run: &mut Run, device: &PrincipalId) -> Result<Vec<TraceEvent>, SchemeError> {
        let start = run.world.step();
        let user = run.dep.user.clone();
        // A fresh authenticator has its own hardware and (for attested
        // models) its own certified attestation key.
        let pin = run.world.store_term(&user, "pin").cloned().expect("deployed");
        run.world.put(device, "pin-check", Term::hash(pin), Scope::User(user.clone()));
        if self.attested {
            let fido = run.dep.operator.clone().expect("deployed");
            let root_sk = run.world.store_term(&fido, "signing-key").cloned().unwrap();
            let (att_sk, att_pk) =
                run.world
                    .key_pair(&device.clone(), &format!("attkey.model42.{device}"), false);
            run.world.put(device, "attestation-key", att_sk, Scope::User(user.clone()));
            let cert = Term::sign(root_sk, Term::pair(Term::atom("model42"), att_pk));
            run.world.put(device, "attestation-cert", cert, Scope::User(user.clone()));
        }

        // Every SP account enrolls the new device individually, gated by the
        // SP's backup authentication.
        for sp in run.dep.sps.clone() {
            run.world
                .send(
                    Channel::web(&user, device),
                    Term::pair(Term::atom("backup-auth"), Term::atom(sp.as_str())),
                    Annotation::UserAction,
                )
                .map_err(SchemeError::from)?;
            self.enroll(run, device, &sp, Annotation::DeviceSetup)
                .map_err(SchemeError::from)?;
        }
        Ok(run.trace_from(start))
    }

    fn authenticate(
        &self,
        run: &mut Run,
        user: &PrincipalId,
        sp: &PrincipalId,
        device: &PrincipalId,
    ) -> AuthOutcome {
        let start = run.world.step();
        let keyname = sp_key_name(user, sp, device);
        if run.world.store_term(device, &keyname).is_none() {
            return AuthOutcome::failure(FailureReason::NoAccount, run.trace_from(start));
        }
        if self.attested
            && run
                .dep
                .blocked_authority
                .as_deref()
                .is_some_and(|b| b == "model42")
        {
            // Attestation metadata names the model; SPs can phase models out.
            return AuthOutcome::failure(FailureReason::IdpFiltered, run.trace_from(start));
        }

        let result = || -> Result<Term, crate::world::WorldError> {
            let w = &mut run.world;
            w.send(Channel::web(device, sp), Term::atom("login"), Annotation::None)?;
            let challenge = w.nonce(&sp.clone(), "challenge");
            w.send(Channel::web(sp, device), challenge.clone(), Annotation::None)?;
            // Local factor unlocks the authenticator.
            let pin = w.store_term(user, "pin").cloned().unwrap();
            w.send(Channel::web(user, device), pin, Annotation::UserAction)?;
            let sk = w.store_term(device, &keyname).cloned().unwrap();
            let assertion = Term::sign(sk, Term::pair(challenge, Term::atom(sp.as_str())));
            w.send(Channel::web(device, sp), assertion.clone(), Annotation::AssertionIssued)?;
            w.send(Channel::web(sp, device), Term::atom("login-ok"), Annotation::AssertionVerifiedLocally)?;
            Ok(assertion)
        }();

        match result {
            Ok(assertion) => {
                let pk = run
                    .world
                    .store_term(sp, &format!("account:{user}"))
                    .cloned()
                    .expect("enrolled");
                run.world
                    .put(sp, &format!("accepted:{user}"), assertion, Scope::User(user.clone()));
                let session = create_session(&mut run.world, sp, user, pk, device);
                AuthOutcome::success(session, run.trace_from(start))
            }
            Err(_) => AuthOutcome::failure(FailureReason::OutagePath, run.trace_from(start)),
        }
    }

    fn switch_idp(&self, run: &mut Run) -> Result<SwitchOutcome, SchemeError> {
        if self.attested {
            // Keys live in certified hardware and cannot be extracted, so
            // there is no migration path to another authenticator.
            return Err(SchemeError::SwitchImpossible(
                "attested keys cannot leave the authenticator".into(),
            ));
        }
        let start = run.world.step();
        run.dep.mark_phase(&run.world, Phase::SwitchIdp);
        let user = run.dep.user.clone();
        let replacement = run
            .world
            .add_principal(&format!("{user}-replacement"), Role::Device, Some(&user));
        run.dep.devices.push(replacement.clone());

        // Software keys export wholesale; SP accounts keep their public keys.
        let old = run.dep.primary_device().clone();
        for sp in run.dep.sps.clone() {
            let keyname = sp_key_name(&user, &sp, &old);
            if let Some(sk) = run.world.store_term(&old, &keyname).cloned() {
                let _ = run.world.send(Channel::pairing(&old, &replacement), sk.clone(), Annotation::DeviceSetup);
                let newname = sp_key_name(&user, &sp, &replacement);
                run.world.put(&replacement, &newname, sk, Scope::User(user.clone()));
            }
        }
        run.dep.home_idp = replacement;
        Ok(SwitchOutcome {
            per_sp_updates: 0,
            intra_federation: false,
            interim_forwarding: false,
            trace: run.trace_from(start),
        })
    }

    fn acceptance(&self, run: &Run, victim: &PrincipalId, sp: &PrincipalId) -> AcceptanceSpec {
        // The SP challenges; only a signature under an enrolled key counts.
        let challenge = Term::Nonce(SecretId::new("atk.challenge"));
        let mut routes = Vec::new();
        for device in &run.dep.devices {
            let keyname = sp_key_name(victim, sp, device);
            if run.world.store_term(device, &keyname).is_some() {
                let sk = Term::PrivKey(SecretId::new(keyname));
                routes.push(Route {
                    label: "sign the SP challenge with an enrolled key",
                    requires: vec![Requirement::Derive(Term::sign(
                        sk,
                        Term::pair(challenge.clone(), Term::atom(sp.as_str())),
                    ))],
                    emits: vec![],
                });
            }
        }
        AcceptanceSpec {
            routes,
            oracles: vec![],
            attacker_seed: vec![challenge.clone()],
            fresh_classes: vec![(challenge, SecretClass::strong())],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn attested_keys_are_hardware_held() {
        let drv = Uaf { attested: true };
        let r = drv.deploy(&DeployConfig::default()).unwrap();
        let (user, dev) = (r.dep.user.clone(), r.dep.primary_device().clone());
        for sp in &r.dep.sps {
            let id = SecretId::new(sp_key_name(&user, sp, &dev));
            let class = r.world.class_of(&id).unwrap();
            assert!(!class.extractable);
        }
        let leaked = r.world.leak(&dev);
        assert!(!leaked.iter().any(|t| matches!(t, Term::PrivKey(_))));
    }

    #[test]
    fn non_attested_keys_leak_from_software() {
        let drv = Uaf { attested: false };
        let r = drv.deploy(&DeployConfig::default()).unwrap();
        let dev = r.dep.primary_device().clone();
        let leaked = r.world.leak(&dev);
        assert!(leaked.iter().any(|t| matches!(t, Term::PrivKey(_))));
    }

    #[test]
    fn enrollment_bundle_chains_to_the_root_when_attested() {
        let drv = Uaf { attested: true };
        let r = drv.deploy(&DeployConfig::default()).unwrap();
        let (user, sp, dev) = (r.dep.user.clone(), r.dep.sps[0].clone(), r.dep.primary_device().clone());
        let bundle = r.world.store_term(&sp, &format!("enrolled:{user}:{dev}")).unwrap();
        let fido = r.dep.operator.clone().unwrap();
        let root = r.world.store_term(&fido, "signing-key").unwrap();
        assert!(bundle.subterms().iter().any(
            |t| matches!(t, Term::Sign(k, _) if **k == *root),
        ));
    }

    #[test]
    fn new_device_enrolls_once_per_sp_account() {
        let drv = Uaf { attested: true };
        let mut cfg = DeployConfig::default();
        cfg.sps = 2;
        let mut r = drv.deploy(&cfg).unwrap();
        let user = r.dep.user.clone();
        let d2 = r.world.add_principal("alice-dev2", Role::Device, Some(&user));
        r.dep.devices.push(d2.clone());
        let trace = drv.setup_device(&mut r, &d2).unwrap();
        assert_eq!(Run::count_annotation(&trace, Annotation::DeviceSetup), 2);
    }

    #[test]
    fn authentication_is_local_and_pin_gated() {
        let drv = Uaf { attested: true };
        let mut r = drv.deploy(&DeployConfig::default()).unwrap();
        let (user, sp, dev) = (r.dep.user.clone(), r.dep.sps[0].clone(), r.dep.primary_device().clone());
        let out = drv.authenticate(&mut r, &user, &sp, &dev);
        assert!(out.success);
        assert_eq!(Run::count_annotation(&out.trace, Annotation::UserAction), 1);
        assert_eq!(Run::count_annotation(&out.trace, Annotation::IdPQueried), 0);
    }

    #[test]
    fn attested_switch_is_impossible_but_software_exports() {
        let mut r = Uaf { attested: true }.deploy(&DeployConfig::default()).unwrap();
        assert!(matches!(
            Uaf { attested: true }.switch_idp(&mut r),
            Err(SchemeError::SwitchImpossible(_))
        ));
        let mut r = Uaf { attested: false }.deploy(&DeployConfig::default()).unwrap();
        let out = Uaf { attested: false }.switch_idp(&mut r).unwrap();
        assert_eq!(out.per_sp_updates, 0);
    }
}
