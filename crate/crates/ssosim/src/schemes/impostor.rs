//! Impostor driver: a proxy-based credential manager.
//!
//! A remote IdP stores the user's per-SP usernames and passwords (in the
//! clear) and submits them on the user's behalf; every byte between user and
//! SP flows through the proxy. Built for untrusted access machines, the
//! user-to-IdP step is a challenge-response against a hardware token whose
//! key never leaves it, so nothing long-term ever touches the access device.

use crate::terms::{SecretClass, SecretId, Term};
use crate::world::{Annotation, Channel, PrincipalId, Role, Scope};

use super::helpers::*;
use super::*;

pub struct Impostor;

fn site_pw_name(user: &PrincipalId, sp: &PrincipalId) -> String {
    format!("sitepw.{user}.{sp}")
}

fn site_account(user: &PrincipalId, sp: &PrincipalId) -> Term {
    Term::atom(format!("acct.{user}.{sp}"))
}

impl SchemeDriver for Impostor {
    fn name(&self) -> SchemeName {
        SchemeName::Impostor
    }

    fn descriptor(&self) -> SchemeDescriptor {
        SchemeDescriptor {
            name: self.name(),
            coords: Coords {
                association: Association::A5,
                conveyance: Conveyance::G4,
                verification: Verification::C2,
                auth_type: AuthType::T1a,
                multi_device: MultiDevice::M1,
            },
            optional_features: vec![],
        }
    }

    fn deploy(&self, cfg: &DeployConfig) -> Result<Run, SchemeError> {
        if cfg.idps == 0 || cfg.sps == 0 {
            return Err(SchemeError::InvalidConfig("need at least one proxy and one SP".into()));
        }
        let (mut w, mut dep) = base_world(cfg, self.name());
        for i in 1..=cfg.idps {
            dep.idps.push(w.add_principal(&format!("idp{i}"), Role::IdP, None));
        }
        dep.home_idp = dep.idps[0].clone();
        let user = dep.user.clone();
        let idp = dep.home_idp.clone();

        // Hardware OTP token: challenge-response with a non-extractable key,
        // the proxy holds only the public half.
        let token = w.add_principal("alice-token", Role::Device, Some(&user));
        w.mark_hardware_token(&token);
        dep.token = Some(token.clone());
        let (otp_sk, otp_pk) = w.key_pair(&token.clone(), &format!("otpkey.{user}"), false);
        w.put(&token, "otp-key", otp_sk, Scope::User(user.clone()));
        w.put(&idp, &format!("otp-pubkey:{user}"), otp_pk, Scope::User(user.clone()));

        // Per-SP credentials, stored in the clear at the proxy; the SPs are
        // ordinary password sites.
        for sp in dep.sps.clone() {
            let pw = w.weak_secret(&user, &site_pw_name(&user, &sp));
            let acct = site_account(&user, &sp);
            w.make_public(acct.clone());
            w.put(
                &idp,
                &format!("cred:{user}:{sp}"),
                Term::pair(acct.clone(), pw.clone()),
                Scope::User(user.clone()),
            );
            w.put(&sp, &format!("pwhash:{user}"), Term::hash(pw), Scope::User(user.clone()));
            w.put(&sp, &format!("account:{user}"), acct.clone(), Scope::User(user.clone()));
            put_account_ids(&mut w, &sp, &user, acct);
        }
        Ok(Run { world: w, dep })
    }

    fn register_sp(&self, _run: &mut Run, _sp: &PrincipalId) -> Vec<TraceEvent> {
        Vec::new()
    }

    fn setup_device(&self, _run: &mut Run, _device: &PrincipalId) -> Result<Vec<TraceEvent>, SchemeError> {
        Ok(Vec::new()) // any machine works: that is the design goal
    }

    fn authenticate(
        &self,
        run: &mut Run,
        user: &PrincipalId,
        sp: &PrincipalId,
        device: &PrincipalId,
    ) -> AuthOutcome {
        let start = run.world.step();
        let idp = run.dep.home_idp.clone();
        let token = run.dep.token.clone().expect("deployed");
        if run.dep.blocked_authority.is_some() {
            // The SP sees an ordinary password login; it has no handle on
            // which proxy (if any) sits behind it, so filtering cannot work.
        }
        let acct = site_account(user, sp);
        let cred = run
            .world
            .store_term(&idp, &format!("cred:{user}:{sp}"))
            .cloned()
            .expect("deployed");

        let result = || -> Result<(), crate::world::WorldError> {
            let w = &mut run.world;
            // Session to the proxy from an arbitrary machine.
            w.send(Channel::web(device, &idp), Term::atom("proxy-connect"), Annotation::None)?;
            let challenge = w.nonce(&idp, "challenge");
            w.send(Channel::web(&idp, device), challenge.clone(), Annotation::None)?;
            // The user keys the challenge into the token and copies the
            // response back; the token never talks to anyone directly.
            w.send(Channel::web(user, &token), challenge.clone(), Annotation::UserAction)?;
            let otp_sk = w.store_term(&token, "otp-key").cloned().unwrap();
            let response = Term::sign(otp_sk, challenge);
            w.send(Channel::web(&token, user), response.clone(), Annotation::None)?;
            w.send(Channel::web(user, device), response.clone(), Annotation::UserAction)?;
            w.send(Channel::web(device, &idp), response, Annotation::None)?;

            // The proxy logs into the SP with the stored credential and
            // relays the session content both ways.
            w.send(Channel::backchannel(&idp, sp), cred.clone(), Annotation::AssertionVerifiedLocally)?;
            let resource = w.nonce(&sp.clone(), "resource");
            w.send(Channel::backchannel(sp, &idp), resource.clone(), Annotation::None)?;
            w.send(Channel::web(&idp, device), resource, Annotation::None)?;
            Ok(())
        }();

        match result {
            Ok(()) => {
                run.world
                    .put(sp, &format!("accepted:{user}"), cred, Scope::User(user.clone()));
                let session = create_session(&mut run.world, sp, user, acct, device);
                AuthOutcome::success(session, run.trace_from(start))
            }
            Err(_) => AuthOutcome::failure(FailureReason::OutagePath, run.trace_from(start)),
        }
    }

    fn switch_idp(&self, run: &mut Run) -> Result<SwitchOutcome, SchemeError> {
        if run.dep.idps.len() < 2 {
            return Err(SchemeError::SwitchImpossible("no second proxy deployed".into()));
        }
        let start = run.world.step();
        run.dep.mark_phase(&run.world, Phase::SwitchIdp);
        let user = run.dep.user.clone();
        let new_idp = run.dep.idps[1].clone();

        // No export path: the user re-enters every SP credential at the new
        // proxy by hand.
        let (otp_sk2, otp_pk2) = run
            .world
            .key_pair(&run.dep.token.clone().unwrap(), &format!("otpkey2.{user}"), false);
        let token = run.dep.token.clone().unwrap();
        run.world.put(&token, "otp-key", otp_sk2, Scope::User(user.clone()));
        run.world
            .put(&new_idp, &format!("otp-pubkey:{user}"), otp_pk2, Scope::User(user.clone()));
        let mut updates = 0;
        for sp in run.dep.sps.clone() {
            let cred = run
                .world
                .store_term(&run.dep.idps[0], &format!("cred:{user}:{sp}"))
                .cloned()
                .expect("deployed");
            let dev = run.dep.primary_device().clone();
            let _ = run.world.send(Channel::web(&user, &dev), cred.clone(), Annotation::UserAction);
            let _ = run.world.send(Channel::web(&dev, &new_idp), cred.clone(), Annotation::UserAction);
            run.world
                .put(&new_idp, &format!("cred:{user}:{sp}"), cred, Scope::User(user.clone()));
            updates += 1;
        }
        run.dep.home_idp = new_idp;
        Ok(SwitchOutcome {
            per_sp_updates: updates,
            intra_federation: false,
            interim_forwarding: false,
            trace: run.trace_from(start),
        })
    }

    fn acceptance(&self, run: &Run, victim: &PrincipalId, sp: &PrincipalId) -> AcceptanceSpec {
        let idp = run.dep.home_idp.clone();
        // The SP is a password site: deriving the stored credential wins
        // outright. Alternatively the proxy submits it for whoever answers
        // the token challenge.
        let pw = Term::WeakSecret(SecretId::new(site_pw_name(victim, sp)));
        let otp_sk = run
            .world
            .store_term(run.dep.token.as_ref().unwrap(), "otp-key")
            .cloned()
            .expect("deployed");
        let challenge = Term::Nonce(SecretId::new("atk.challenge"));
        AcceptanceSpec {
            routes: vec![
                Route {
                    label: "replay the stored site credential",
                    requires: vec![Requirement::Derive(pw)],
                    emits: vec![],
                },
                Route {
                    label: "drive the proxy by answering its token challenge",
                    requires: vec![Requirement::Oracle("proxy-login")],
                    emits: vec![],
                },
            ],
            oracles: vec![Oracle {
                id: "proxy-login",
                issuer: idp,
                needs: vec![Term::sign(otp_sk, challenge.clone())],
                yields: vec![Term::atom("proxied-session")],
                emits: vec![],
            }],
            attacker_seed: vec![challenge.clone()],
            fresh_classes: vec![(challenge, SecretClass::strong())],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_sp_traffic_flows_through_the_proxy() {
        let mut r = Impostor.deploy(&DeployConfig::default()).unwrap();
        let (user, sp, dev) = (r.dep.user.clone(), r.dep.sps[0].clone(), r.dep.primary_device().clone());
        let out = Impostor.authenticate(&mut r, &user, &sp, &dev);
        assert!(out.success);
        let idp = r.dep.home_idp.clone();
        for e in out.trace.iter().filter(|e| e.channel.from == sp || e.channel.to == sp) {
            let other = if e.channel.from == sp { &e.channel.to } else { &e.channel.from };
            assert_eq!(other, &idp, "no direct user-SP contact");
        }
    }

    #[test]
    fn token_never_receives_network_traffic_from_the_proxy() {
        let mut r = Impostor.deploy(&DeployConfig::default()).unwrap();
        let (user, sp, dev) = (r.dep.user.clone(), r.dep.sps[0].clone(), r.dep.primary_device().clone());
        Impostor.authenticate(&mut r, &user, &sp, &dev);
        let token = r.dep.token.clone().unwrap();
        let idp = r.dep.home_idp.clone();
        assert!(!r
            .world
            .trace()
            .iter()
            .any(|e| e.channel.to == token && e.channel.from == idp));
    }

    #[test]
    fn proxy_stores_credentials_in_the_clear() {
        let r = Impostor.deploy(&DeployConfig::default()).unwrap();
        let (user, sp) = (r.dep.user.clone(), r.dep.sps[0].clone());
        let leaked = r.world.leak_user_scoped(&r.dep.home_idp, &user);
        let pw = Term::WeakSecret(SecretId::new(site_pw_name(&user, &sp)));
        assert!(leaked.iter().any(|t| t.contains(&pw)));
    }

    #[test]
    fn access_device_leak_holds_no_long_term_secret() {
        let mut r = Impostor.deploy(&DeployConfig::default()).unwrap();
        let (user, sp, dev) = (r.dep.user.clone(), r.dep.sps[0].clone(), r.dep.primary_device().clone());
        Impostor.authenticate(&mut r, &user, &sp, &dev);
        let leaked = r.world.leak(&dev);
        assert!(leaked.is_empty(), "one-time responses are not stored");
    }

    #[test]
    fn switch_means_reentering_every_credential() {
        let mut cfg = DeployConfig::default();
        cfg.sps = 3;
        let mut r = Impostor.deploy(&cfg).unwrap();
        let out = Impostor.switch_idp(&mut r).unwrap();
        assert_eq!(out.per_sp_updates, 3);
    }
}
