//! Mobile Connect driver (LoA2, LoA3, and the impersonation-resistant
//! augmentation).
//!
//! A federation of mobile network operators: discovery maps the user's phone
//! number to their operator, the phone is the hardware authenticator, and the
//! assertion carries the achieved assurance level under the operator's key,
//! which the federation has vetted.
//!
//! LoA2 verifies possession via an SMS one-time password. LoA3 gates a
//! SIM-resident signing key behind a local PIN (two-stage). The augmented
//! variant adds SIM-held per-SP key pairs whose public halves the operator
//! certifies: an operator trying to impersonate a user must rotate the
//! enrolled key, which users notice.

use crate::terms::{SecretClass, SecretId, Term};
use crate::world::{Annotation, Channel, PrincipalId, Role, Scope};

use super::helpers::*;
use super::*;

pub struct MobileConnect {
    pub loa3: bool,
    pub augmented: bool,
}

impl MobileConnect {
    fn loa_atom(&self) -> Term {
        Term::atom(if self.loa3 { "loa3" } else { "loa2" })
    }

    fn sp_key_name(user: &PrincipalId, sp: &PrincipalId) -> String {
        format!("simspkey.{user}.{sp}")
    }
}

impl SchemeDriver for MobileConnect {
    fn name(&self) -> SchemeName {
        match (self.loa3, self.augmented) {
            (false, _) => SchemeName::MobileConnectLoa2,
            (true, false) => SchemeName::MobileConnectLoa3,
            (true, true) => SchemeName::MobileConnectAugmented,
        }
    }

    fn descriptor(&self) -> SchemeDescriptor {
        SchemeDescriptor {
            name: self.name(),
            coords: Coords {
                association: Association::A3,
                conveyance: Conveyance::G1,
                verification: Verification::C1,
                auth_type: if self.loa3 { AuthType::T1bStage } else { AuthType::T1a },
                multi_device: MultiDevice::M2,
            },
            optional_features: vec![],
        }
    }

    fn deploy(&self, cfg: &DeployConfig) -> Result<Run, SchemeError> {
        if cfg.idps == 0 || cfg.sps == 0 {
            return Err(SchemeError::InvalidConfig("need at least one operator and one SP".into()));
        }
        let (mut w, mut dep) = base_world(cfg, self.name());
        let gsma = w.add_principal("gsma", Role::FederationOperator, None);
        dep.operator = Some(gsma.clone());
        let (gsma_sk, gsma_pk) = w.key_pair(&gsma.clone(), "gsmakey", true);
        w.put(&gsma, "signing-key", gsma_sk.clone(), Scope::Server);
        w.make_public(gsma_pk);

        for i in 1..=cfg.idps {
            let mno = w.add_principal(&format!("mno{i}"), Role::IdP, None);
            let (sk, pk) = w.key_pair(&mno.clone(), &format!("mnokey.{mno}"), true);
            w.put(&mno, "signing-key", sk, Scope::Server);
            w.make_public(pk.clone());
            let _ = w.send(
                Channel::web(&mno, &gsma),
                Term::pair(Term::atom("federation-join"), pk.clone()),
                Annotation::ManualRegistration,
            );
            let vet = Term::sign(gsma_sk.clone(), Term::pair(Term::atom(mno.as_str()), pk));
            w.put(&gsma, &format!("vetted:{mno}"), vet.clone(), Scope::Server);
            let _ = w.send(Channel::web(&gsma, &mno), vet, Annotation::None);
            dep.idps.push(mno);
        }
        dep.home_idp = dep.idps[0].clone();

        // The user's phone: a hardware token carrying the SIM.
        let user = dep.user.clone();
        let mno = dep.home_idp.clone();
        let phone = w.add_principal("alice-phone", Role::Device, Some(&user));
        w.mark_hardware_token(&phone);
        dep.token = Some(phone.clone());

        let msisdn = Term::atom(format!("msisdn.{user}"));
        w.make_public(msisdn.clone());
        w.put(&gsma, &format!("msisdn-map:{user}"), Term::pair(msisdn.clone(), Term::atom(mno.as_str())), Scope::User(user.clone()));
        w.put(&mno, &format!("msisdn:{user}"), msisdn, Scope::User(user.clone()));

        if self.loa3 {
            // SIM-resident authentication key; the operator holds only the
            // public half. A local PIN gates its use.
            let (sim_sk, sim_pk) = w.key_pair(&phone.clone(), &format!("simkey.{user}.{mno}"), false);
            w.put(&phone, "sim-key", sim_sk, Scope::User(user.clone()));
            w.put(&mno, &format!("sim-pubkey:{user}"), sim_pk, Scope::User(user.clone()));
            let pin = w.weak_secret(&user, &format!("pin.{user}"));
            w.put(&phone, "pin-check", Term::hash(pin.clone()), Scope::User(user.clone()));
            w.put(&user, "pin", pin, Scope::User(user.clone()));
        }

        w.put(
            &mno,
            &format!("profile:{user}"),
            Term::pair(Term::atom("attributes"), Term::atom(format!("attrs.{user}"))),
            Scope::User(user.clone()),
        );

        let mut aug_enroll: Vec<(PrincipalId, Term, Term)> = Vec::new();
        for sp in dep.sps.clone() {
            let pseudo = w.nonce(&mno.clone(), &format!("pcr.{user}.{sp}"));
            w.put(&mno, &format!("pairwise:{user}:{sp}"), pseudo.clone(), Scope::User(user.clone()));
            w.put(&sp, &format!("account:{user}"), pseudo.clone(), Scope::User(user.clone()));
            put_account_ids(&mut w, &sp, &user, pseudo);
            if self.augmented {
                // Per-SP key pair generated on the SIM; the operator signs
                // the public half so SPs can pin it.
                let (sp_sk, sp_pk) = w.key_pair(&phone.clone(), &Self::sp_key_name(&user, &sp), false);
                w.put(&phone, &Self::sp_key_name(&user, &sp), sp_sk, Scope::User(user.clone()));
                let mno_sk = w.store_term(&mno, "signing-key").cloned().unwrap();
                let cert = Term::sign(mno_sk, Term::pair(sp_pk.clone(), Term::atom(format!("{user}"))));
                aug_enroll.push((sp.clone(), sp_pk, cert));
            }
        }
        for (sp, pk, cert) in aug_enroll {
            let _ = w.send(Channel::web(&phone, &sp), Term::pair(pk.clone(), cert.clone()), Annotation::DeviceSetup);
            w.put(&sp, &format!("enrolled-key:{user}"), Term::pair(pk, cert), Scope::User(user.clone()));
        }
        Ok(Run { world: w, dep })
    }

    fn register_sp(&self, run: &mut Run, sp: &PrincipalId) -> Vec<TraceEvent> {
        let start = run.world.step();
        let gsma = run.dep.operator.clone().expect("deployed");
        let _ = run.world.send(
            Channel::web(sp, &gsma),
            Term::pair(Term::atom("federation-join"), Term::atom(sp.as_str())),
            Annotation::ManualRegistration,
        );
        run.world.put(&gsma, &format!("member:{sp}"), Term::atom(sp.as_str()), Scope::Server);
        run.trace_from(start)
    }

    fn setup_device(&self, _run: &mut Run, _device: &PrincipalId) -> Result<Vec<TraceEvent>, SchemeError> {
        Ok(Vec::new()) // any access device works as long as the phone is at hand
    }

    fn authenticate(
        &self,
        run: &mut Run,
        user: &PrincipalId,
        sp: &PrincipalId,
        device: &PrincipalId,
    ) -> AuthOutcome {
        let start = run.world.step();
        let mno = run.dep.home_idp.clone();
        let gsma = run.dep.operator.clone().expect("deployed");
        let phone = run.dep.token.clone().expect("deployed");
        if run
            .dep
            .blocked_authority
            .as_deref()
            .is_some_and(|b| b == mno.as_str())
        {
            return AuthOutcome::failure(FailureReason::IdpFiltered, run.trace_from(start));
        }
        let pseudo = run
            .world
            .store_term(&mno, &format!("pairwise:{user}:{sp}"))
            .cloned()
            .expect("account");
        let msisdn = Term::atom(format!("msisdn.{user}"));
        let loa = self.loa_atom();
        let loa3 = self.loa3;
        let augmented = self.augmented;

        let result = || -> Result<Term, crate::world::WorldError> {
            let w = &mut run.world;
            // The user gives the SP their phone number; discovery resolves
            // the responsible operator.
            w.send(Channel::web(user, device), msisdn.clone(), Annotation::UserAction)?;
            w.send(Channel::web(device, sp), msisdn.clone(), Annotation::None)?;
            w.send(Channel::web(sp, &gsma), msisdn.clone(), Annotation::None)?;
            w.send(
                Channel::web(&gsma, sp),
                Term::pair(Term::atom("operator"), Term::atom(mno.as_str())),
                Annotation::IdPSelected,
            )?;
            w.send(
                Channel::redirect(sp, &mno, device),
                Term::list(&[Term::atom("auth-request"), Term::atom(sp.as_str()), loa.clone()]),
                Annotation::None,
            )?;

            if loa3 {
                // Stage one: local PIN on the phone. Stage two: the SIM signs
                // the operator's challenge.
                let challenge = w.nonce(&mno, "simchal");
                w.send(Channel::sms(&mno, &phone), challenge.clone(), Annotation::None)?;
                let pin = w.store_term(user, "pin").cloned().unwrap();
                w.send(Channel::web(user, &phone), pin, Annotation::UserAction)?;
                let sim_sk = w.store_term(&phone, "sim-key").cloned().unwrap();
                let response = Term::sign(sim_sk, challenge);
                w.send(Channel::web(&phone, &mno), response, Annotation::None)?;
            } else {
                // Possession check: SMS one-time password typed into the
                // access device.
                let otp = w.nonce(&mno, "smsotp");
                w.send(Channel::sms(&mno, &phone), otp.clone(), Annotation::None)?;
                w.send(Channel::web(user, device), otp.clone(), Annotation::UserAction)?;
                w.send(Channel::web(device, &mno), otp, Annotation::None)?;
            }

            let code = w.nonce(&mno, "code");
            w.send(Channel::redirect(&mno, sp, device), code.clone(), Annotation::AssertionIssued)?;
            w.send(Channel::backchannel(sp, &mno), code, Annotation::IdPQueried)?;
            let token = w.nonce(&mno, "token");
            w.send(Channel::backchannel(&mno, sp), token.clone(), Annotation::None)?;

            let sk = w.store_term(&mno, "signing-key").cloned().unwrap();
            let n = w.nonce(&mno, "assert");
            let assertion = Term::sign(
                sk,
                Term::list(&[
                    pseudo.clone(),
                    Term::atom(sp.as_str()),
                    Term::pair(Term::atom("loa"), loa.clone()),
                    n,
                ]),
            );
            w.send(Channel::backchannel(sp, &mno), token, Annotation::IdPQueried)?;
            w.send(Channel::backchannel(&mno, sp), assertion.clone(), Annotation::LoASignalled)?;

            if augmented {
                // Device-to-SP challenge-response with the enrolled SIM key.
                let sp_chal = w.nonce(&sp.clone(), "spchal");
                w.send(Channel::web(sp, device), sp_chal.clone(), Annotation::None)?;
                w.send(Channel::web(device, &phone), sp_chal.clone(), Annotation::None)?;
                let sp_sk = w.store_term(&phone, &Self::sp_key_name(user, sp)).cloned().unwrap();
                let proof = Term::sign(sp_sk, sp_chal);
                w.send(Channel::web(&phone, device), proof.clone(), Annotation::None)?;
                w.send(Channel::web(device, sp), proof, Annotation::AssertionVerifiedLocally)?;
            }

            let attrs = w.store_term(&mno, &format!("profile:{user}")).cloned().unwrap();
            w.send(Channel::backchannel(&mno, sp), attrs, Annotation::ProfileDataShared)?;
            Ok(assertion)
        }();

        match result {
            Ok(assertion) => {
                run.world
                    .put(sp, &format!("accepted:{user}"), assertion, Scope::User(user.clone()));
                let session = create_session(&mut run.world, sp, user, pseudo, device);
                AuthOutcome::success(session, run.trace_from(start))
            }
            Err(_) => AuthOutcome::failure(FailureReason::OutagePath, run.trace_from(start)),
        }
    }

    fn switch_idp(&self, run: &mut Run) -> Result<SwitchOutcome, SchemeError> {
        if run.dep.idps.len() < 2 {
            return Err(SchemeError::SwitchImpossible("no second operator deployed".into()));
        }
        let start = run.world.step();
        run.dep.mark_phase(&run.world, Phase::SwitchIdp);
        let user = run.dep.user.clone();
        let new_mno = run.dep.idps[1].clone();

        // Changing operators abandons the pseudonyms the old operator
        // maintained; every SP account must be re-linked by hand.
        let mut updates = 0;
        for sp in run.dep.sps.clone() {
            let pseudo = run.world.nonce(&new_mno.clone(), &format!("pcr.{user}.{sp}"));
            run.world
                .put(&new_mno, &format!("pairwise:{user}:{sp}"), pseudo.clone(), Scope::User(user.clone()));
            let dev = run.dep.primary_device().clone();
            let _ = run.world.send(Channel::web(&user, &dev), pseudo.clone(), Annotation::UserAction);
            let _ = run.world.send(Channel::web(&dev, &sp), pseudo.clone(), Annotation::UserAction);
            run.world.put(&sp, &format!("account:{user}"), pseudo.clone(), Scope::User(user.clone()));
            put_account_ids(&mut run.world, &sp, &user, pseudo);
            updates += 1;
        }
        run.dep.home_idp = new_mno;
        Ok(SwitchOutcome {
            per_sp_updates: updates,
            intra_federation: false,
            interim_forwarding: false,
            trace: run.trace_from(start),
        })
    }

    fn acceptance(&self, run: &Run, victim: &PrincipalId, sp: &PrincipalId) -> AcceptanceSpec {
        let mno = run.dep.home_idp.clone();
        let sk = run.world.store_term(&mno, "signing-key").cloned().expect("deployed");
        let pseudo = run
            .world
            .store_term(&mno, &format!("pairwise:{victim}:{sp}"))
            .cloned()
            .expect("account");
        let fresh = Term::Nonce(SecretId::new("atk.nonce"));
        let assertion = Term::sign(
            sk.clone(),
            Term::list(&[
                pseudo,
                Term::atom(sp.as_str()),
                Term::pair(Term::atom("loa"), self.loa_atom()),
                fresh.clone(),
            ]),
        );

        let mut fresh_terms = vec![(fresh.clone(), SecretClass::strong())];
        let mut seed = vec![fresh.clone()];
        let mut oracles = Vec::new();
        let mut routes = Vec::new();

        // The operator only mints an assertion after the possession factor:
        // a SIM signature over its challenge (LoA3) or echo of the SMS
        // one-time password it just sent to the victim's phone.
        let factor = if self.loa3 {
            let chal = Term::Nonce(SecretId::new("atk.simchal"));
            fresh_terms.push((chal.clone(), SecretClass::strong()));
            seed.push(chal.clone());
            let sim_sk = run
                .world
                .store_term(run.dep.token.as_ref().unwrap(), "sim-key")
                .cloned()
                .expect("deployed");
            Term::sign(sim_sk, chal)
        } else {
            // Delivered to the victim's phone; unreadable without it.
            let otp = Term::Nonce(SecretId::new("atk.smsotp"));
            fresh_terms.push((otp.clone(), SecretClass::strong()));
            Term::pair(Term::atom("otp-echo"), otp)
        };
        oracles.push(Oracle {
            id: "mno-issue",
            issuer: mno.clone(),
            needs: vec![factor],
            yields: vec![assertion.clone()],
            emits: vec![],
        });

        if self.augmented {
            // The SP additionally demands a signature with the enrolled
            // per-SP SIM key over its own challenge.
            let sp_chal = Term::Nonce(SecretId::new("atk.spchal"));
            fresh_terms.push((sp_chal.clone(), SecretClass::strong()));
            seed.push(sp_chal.clone());
            let sp_sk = Term::PrivKey(SecretId::new(Self::sp_key_name(victim, sp)));
            routes.push(Route {
                label: "operator assertion plus enrolled-key proof",
                requires: vec![
                    Requirement::Derive(assertion.clone()),
                    Requirement::Derive(Term::sign(sp_sk, sp_chal.clone())),
                ],
                emits: vec![],
            });
            // Key rotation: the operator can replace the enrolled key with
            // one it controls, but the rotation is announced and the victim
            // loses access — an observable revocation.
            let (rot_sk, rot_pk) = (
                Term::PrivKey(SecretId::new("atk.rotated-key")),
                Term::PubKey(SecretId::new("atk.rotated-key")),
            );
            fresh_terms.push((rot_sk.clone(), SecretClass::strong()));
            oracles.push(Oracle {
                id: "rotate-enrolled-key",
                issuer: mno,
                needs: vec![Term::sign(
                    run.world
                        .store_term(run.dep.token.as_ref().unwrap(), "sim-key")
                        .cloned()
                        .expect("deployed"),
                    Term::atom("rotation-consent"),
                )],
                yields: vec![rot_sk.clone(), rot_pk],
                emits: vec![Annotation::KeyRevocation],
            });
            routes.push(Route {
                label: "operator assertion plus rotated-key proof",
                requires: vec![
                    Requirement::Derive(assertion),
                    Requirement::Oracle("rotate-enrolled-key"),
                    Requirement::Derive(Term::sign(rot_sk, sp_chal.clone())),
                ],
                emits: vec![],
            });
        } else {
            routes.push(Route {
                label: "present an operator-signed assertion for the victim",
                requires: vec![Requirement::Derive(assertion)],
                emits: vec![],
            });
        }

        AcceptanceSpec { routes, oracles, attacker_seed: seed, fresh_classes: fresh_terms }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn loa3() -> MobileConnect {
        MobileConnect { loa3: true, augmented: false }
    }

    #[test]
    fn registration_is_with_the_federation_only() {
        let drv = loa3();
        let mut r = drv.deploy(&DeployConfig::default()).unwrap();
        let sp = r.dep.sps[0].clone();
        let trace = drv.register_sp(&mut r, &sp);
        assert_eq!(Run::count_annotation(&trace, Annotation::ManualRegistration), 1);
    }

    #[test]
    fn loa3_runs_pin_before_possession_factor() {
        let drv = loa3();
        let mut r = drv.deploy(&DeployConfig::default()).unwrap();
        let (user, sp, dev) = (r.dep.user.clone(), r.dep.sps[0].clone(), r.dep.primary_device().clone());
        drv.register_sp(&mut r, &sp);
        let out = drv.authenticate(&mut r, &user, &sp, &dev);
        assert!(out.success);
        let phone = r.dep.token.clone().unwrap();
        let pin_step = out
            .trace
            .iter()
            .find(|e| e.annotation == Annotation::UserAction && e.channel.to == phone)
            .expect("local PIN entry")
            .seq;
        let possession = out
            .trace
            .iter()
            .find(|e| e.channel.from == phone && e.channel.to == r.dep.home_idp)
            .expect("possession leg")
            .seq;
        assert!(pin_step < possession);
    }

    #[test]
    fn loa2_sends_sms_otp() {
        let drv = MobileConnect { loa3: false, augmented: false };
        let mut r = drv.deploy(&DeployConfig::default()).unwrap();
        let (user, sp, dev) = (r.dep.user.clone(), r.dep.sps[0].clone(), r.dep.primary_device().clone());
        drv.register_sp(&mut r, &sp);
        let out = drv.authenticate(&mut r, &user, &sp, &dev);
        assert!(out.success);
        assert!(out
            .trace
            .iter()
            .any(|e| e.channel.kind == crate::world::ChannelKind::Sms));
    }

    #[test]
    fn switching_operators_updates_every_sp() {
        let drv = loa3();
        let mut r = drv.deploy(&DeployConfig::default()).unwrap();
        let out = drv.switch_idp(&mut r).unwrap();
        assert_eq!(out.per_sp_updates, 2);
    }

    #[test]
    fn augmented_enrolls_operator_signed_keys() {
        let drv = MobileConnect { loa3: true, augmented: true };
        let r = drv.deploy(&DeployConfig::default()).unwrap();
        let user = &r.dep.user;
        for sp in &r.dep.sps {
            let enrolled = r.world.store_term(sp, &format!("enrolled-key:{user}"));
            assert!(enrolled.is_some());
        }
    }
}
