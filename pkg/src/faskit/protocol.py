"""Entity state machines and the five-step frictionless authentication flow.

Entities: the user's gateway PersonalDevice (PD), sensor-bearing
DumbDevices (DDs) that talk only to the PD, the ServiceProvider (SP) that
challenges and verifies, and the FaspService that assists with score
fusion. All interaction is modeled as immutable Messages; every entity
keeps an append-only transcript of what it sent and received, which is
what dispute resolution audits offline.

A flow runs: AuthRequest -> Challenge -> sensor collection -> score
fusion and gating -> (only if the gate passes) the signing ceremony of
the active case strategy -> AuthResponse -> AuthResult.

Case strategies:
  CASE1 - the whole private key sits on the PD; the PD signs alone.
  CASE2 - each device persistently stores one key share; any t+1 live
          devices run the two-round threshold signing.
  CASE3 - devices store nothing; the PD holds helper data per device and
          delivers it each session, the device regenerates its share from
          its current sensor template, checks it against the public
          commitments, signs, and erases everything.

The gate always derives from the raw readings the PD collected: in cloud
score modes the PD cross-checks the service's fused value against its own
local fusion and falls back to the local value on disagreement beyond the
quantization tolerance, so a forged ScoreResponse cannot open the gate.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from enum import Enum

from .algebra import GroupParams
from .authscore import (AuthScore, FusionPolicy, Modality, ModalityReading,
                        PheKeypair, fuse_encrypted, fuse_local, gate,
                        modality_means, normalize_fused, phe_decrypt,
                        phe_encrypt, quantize_score)
from .errors import (CorruptedShareError, InsufficientSharesError,
                     InvalidPartialError, ParameterError, PolicyError,
                     RegistrationError, SessionError)
from .fuzzyextractor import (CodeParams, HelperData, bits_to_scalar,
                             fe_enroll, fe_reproduce, scalar_to_bits)
from .sharing import (FeldmanCommitments, Share, ThresholdParams,
                      verify_share)
from .thresholdsig import (DeviceSigner, GroupPublicKey, NonceCommitment,
                           PartialSignature, Signature, combine,
                           compute_challenge_scalar, keygen_dealer)
from .thresholdsig import verify as verify_signature

WIRE_VERSION = "FAS-v1"
NONCE_BYTES = 32
DEFAULT_NONCE_TTL = 100
CLOUD_AGREEMENT_TOL = 0.01


class MessageType(str, Enum):
    AUTH_REQUEST = "AuthRequest"
    CHALLENGE = "Challenge"
    SCORE_REQUEST = "ScoreRequest"
    SENSOR_READING = "SensorReading"
    SCORE_RESPONSE = "ScoreResponse"
    HELPER_DELIVERY = "HelperDelivery"
    SIGN_ROUND1 = "SignRound1"
    SIGN_ROUND2 = "SignRound2"
    AUTH_RESPONSE = "AuthResponse"
    AUTH_RESULT = "AuthResult"


class Case(Enum):
    CASE1 = 1
    CASE2 = 2
    CASE3 = 3


@dataclass(frozen=True)
class Message:
    type: MessageType
    sender: str
    receiver: str
    session_id: str
    payload: dict


def message_to_wire(msg: Message) -> str:
    """Canonical one-line JSON wire encoding."""
    return json.dumps(
        {"v": WIRE_VERSION, "type": msg.type.value, "from": msg.sender,
         "to": msg.receiver, "session": msg.session_id,
         "payload": msg.payload},
        sort_keys=True, separators=(",", ":"))


def message_from_wire(line: str) -> Message:
    obj = json.loads(line)
    if obj.get("v") != WIRE_VERSION:
        raise ParameterError(f"unsupported wire version {obj.get('v')!r}")
    return Message(type=MessageType(obj["type"]), sender=obj["from"],
                   receiver=obj["to"], session_id=obj["session"],
                   payload=obj["payload"])


def signing_message_bytes(sp_id: str, nonce: bytes) -> bytes:
    """Normative byte layout of what gets signed: version, SP identity,
    and the challenge nonce. Binding sp_id blocks cross-SP replay."""
    return WIRE_VERSION.encode("utf-8") + sp_id.encode("utf-8") + nonce


@dataclass(frozen=True)
class RegistrationRecord:
    """What the SP learns at registration: the user and her public key."""

    user_id: str
    pubkey: GroupPublicKey


@dataclass
class CaseStrategy:
    """The active solution variant plus its per-case knobs."""

    case: Case
    pd_holds_share: bool = False
    code: CodeParams | None = None  # CASE3 repetition-code geometry

    def __post_init__(self):
        if self.case is Case.CASE3 and self.code is None:
            raise ParameterError("CASE3 requires code parameters")


class _Transcript:
    """Append-only per-entity message log (audit support)."""

    def __init__(self):
        self.transcript: list = []

    def record(self, msg: Message) -> None:
        self.transcript.append(msg)


# ---------------------------------------------------------------------------
# Service provider
# ---------------------------------------------------------------------------

class ServiceProvider(_Transcript):
    """Issues single-use challenges and verifies signed responses."""

    def __init__(self, sp_id: str, rng: random.Random,
                 nonce_ttl: int = DEFAULT_NONCE_TTL,
                 challenge_fn=compute_challenge_scalar):
        super().__init__()
        self.sp_id = sp_id
        self._rng = rng
        self._nonce_ttl = nonce_ttl
        self._challenge_fn = challenge_fn
        self._users: dict = {}
        self._nonces: dict = {}
        self._session_counter = 0

    def register_user(self, record: RegistrationRecord) -> None:
        self._users[record.user_id] = record.pubkey

    def new_session(self) -> str:
        self._session_counter += 1
        return f"{self.sp_id}-s{self._session_counter:06d}"

    def issue_challenge(self, user_id: str, session_id: str,
                        now: int) -> Message:
        if user_id not in self._users:
            raise RegistrationError(f"unknown user {user_id!r}")
        nonce = self._rng.getrandbits(8 * NONCE_BYTES).to_bytes(
            NONCE_BYTES, "big")
        while nonce.hex() in self._nonces:
            nonce = self._rng.getrandbits(8 * NONCE_BYTES).to_bytes(
                NONCE_BYTES, "big")
        self._nonces[nonce.hex()] = {"user_id": user_id, "issued": now,
                                     "used": False}
        msg = Message(type=MessageType.CHALLENGE, sender=self.sp_id,
                      receiver="pd", session_id=session_id,
                      payload={"sp_id": self.sp_id, "nonce": nonce.hex()})
        self.record(msg)
        return msg

    def verify(self, response: Message, now: int) -> Message:
        """Check the signed response; grant only for a fresh, unused nonce
        and a signature valid under the registered public key."""
        self.record(response)
        payload = response.payload
        nonce_hex = payload.get("nonce", "")
        entry = self._nonces.get(nonce_hex)
        if entry is None:
            return self._result(response, False, "nonce-unknown")
        if entry["used"]:
            return self._result(response, False, "replay")
        if now - entry["issued"] > self._nonce_ttl:
            return self._result(response, False, "expired")
        pubkey = self._users[entry["user_id"]]
        try:
            sig = Signature.from_json(payload["signature"])
        except (KeyError, TypeError, ValueError):
            return self._result(response, False, "signature")
        message = signing_message_bytes(self.sp_id, bytes.fromhex(nonce_hex))
        if not verify_signature(pubkey, message, sig,
                                challenge_fn=self._challenge_fn):
            return self._result(response, False, "signature")
        entry["used"] = True
        return self._result(response, True, "ok")

    def _result(self, response: Message, granted: bool,
                reason: str) -> Message:
        msg = Message(type=MessageType.AUTH_RESULT, sender=self.sp_id,
                      receiver=response.sender,
                      session_id=response.session_id,
                      payload={"granted": granted, "reason": reason})
        self.record(msg)
        return msg


def request_challenge(user_id: str, sp: ServiceProvider,
                      now: int):
    """Step 1 and 2 of the flow: AuthRequest in, Challenge out."""
    session = sp.new_session()
    req = Message(type=MessageType.AUTH_REQUEST, sender="pd",
                  receiver=sp.sp_id, session_id=session,
                  payload={"user_id": user_id})
    sp.record(req)
    challenge = sp.issue_challenge(user_id, session, now)
    return req, challenge


# ---------------------------------------------------------------------------
# Score fusion service
# ---------------------------------------------------------------------------

class FaspService(_Transcript):
    """Fuses scores on request. In encrypted mode it aggregates Paillier
    ciphertexts and never sees a plaintext score; requests deliberately
    carry no SP identifier, so the service cannot tell where the user is
    authenticating."""

    def __init__(self, fasp_id: str = "fasp"):
        super().__init__()
        self.fasp_id = fasp_id
        self._policies: dict = {}
        self._paillier_pubs: dict = {}
        self._plain_scores_seen: list = []

    def register_policy(self, user_id: str, policy: FusionPolicy,
                        paillier_pub=None) -> None:
        self._policies[user_id] = policy
        if paillier_pub is not None:
            self._paillier_pubs[user_id] = paillier_pub

    def handle_score_request(self, msg: Message) -> Message:
        self.record(msg)
        user_id = msg.payload.get("user_id", "")
        policy = self._policies.get(user_id)
        if policy is None:
            raise PolicyError(f"no fusion policy for user {user_id!r}")
        mode = msg.payload.get("mode")
        if mode == "plain":
            scores = {Modality(k): int(v)
                      for k, v in msg.payload["scores"].items()}
            # A plain-mode service retains what it was sent; the privacy
            # inspection in the simulator points at exactly this.
            self._plain_scores_seen.extend(sorted(
                (m.value, v) for m, v in scores.items()))
            weights = {m: w for m, w in policy.weights.items()
                       if m in scores and w > 0}
            total = sum(weights.values())
            value = 0.0
            if total > 0:
                value = sum(w * scores[m] for m, w in weights.items()) \
                    / total / 100.0
            payload = {"user_id": user_id, "mode": "plain", "value": value}
        elif mode == "encrypted":
            pub = self._paillier_pubs.get(user_id)
            if pub is None:
                raise PolicyError(f"no encryption key for user {user_id!r}")
            ciphertexts = {Modality(k): int(v, 16)
                           for k, v in msg.payload["ciphertexts"].items()}
            weights = policy.integer_weights(ciphertexts.keys())
            fused = fuse_encrypted(ciphertexts, weights, pub)
            payload = {"user_id": user_id, "mode": "encrypted",
                       "ciphertext": format(fused, "x")}
        else:
            raise PolicyError(f"unknown score mode {mode!r}")
        reply = Message(type=MessageType.SCORE_RESPONSE,
                        sender=self.fasp_id, receiver=msg.sender,
                        session_id=msg.session_id, payload=payload)
        self.record(reply)
        return reply

    def state_snapshot(self) -> dict:
        """Inspection hook: every plaintext score this service retains."""
        return {"plaintext_scores": list(self._plain_scores_seen)}


# ---------------------------------------------------------------------------
# Dumb device
# ---------------------------------------------------------------------------

class DumbDevice(_Transcript):
    """Sensor-bearing wearable. Talks only to the PD.

    In CASE2 it persistently stores its key share. In CASE3 it stores
    nothing between sessions: each session it regenerates the share from
    helper data plus its current template, and end_session erases it.
    """

    def __init__(self, index: int, modalities):
        super().__init__()
        self.index = index
        self.device_id = f"dd{index}"
        self.modalities = list(modalities)
        # What the sensors would measure right now; set by the caller.
        self.current_scores: dict = {}
        self.current_template: str | None = None
        self._persistent_signer: DeviceSigner | None = None
        self._transient: tuple | None = None  # (session_id, DeviceSigner)

    def read_sensor(self, now: int):
        return [ModalityReading(device_id=self.device_id, modality=m,
                                score=self.current_scores[m], timestamp=now)
                for m in self.modalities if m in self.current_scores]

    def install_key_share(self, share: Share, group: GroupParams) -> None:
        self._persistent_signer = DeviceSigner(share, group)

    def receive_helper(self, helper: HelperData,
                       commitments: FeldmanCommitments,
                       group: GroupParams, session_id: str) -> bool:
        """CASE3: regenerate the key share from the current template.

        Returns False when the recovered share fails the commitment check
        (too-noisy or impostor template); the device then sits the
        session out.
        """
        if self.current_template is None:
            return False
        bits = fe_reproduce(self.current_template, helper)
        try:
            value = bits_to_scalar(bits, group.field)
        except CorruptedShareError:
            return False
        share = Share(index=self.index, value=value)
        if not verify_share(share, commitments, group):
            return False
        self._transient = (session_id, DeviceSigner(share, group))
        return True

    def _signer_for(self, session_id: str) -> DeviceSigner:
        if self._persistent_signer is not None:
            return self._persistent_signer
        if self._transient is not None and self._transient[0] == session_id:
            return self._transient[1]
        raise SessionError(
            f"{self.device_id} holds no signing material for {session_id!r}")

    def sign_round1(self, session_id: str,
                    rng: random.Random) -> NonceCommitment:
        return self._signer_for(session_id).round1(session_id, rng)

    def sign_round2(self, session_id: str, challenge: int,
                    signer_set) -> PartialSignature:
        return self._signer_for(session_id).round2(session_id, challenge,
                                                   signer_set)

    def end_session(self, session_id: str) -> None:
        """Erase all transient signing material for this session."""
        if self._persistent_signer is not None:
            self._persistent_signer.abort_session(session_id)
        if self._transient is not None and self._transient[0] == session_id:
            self._transient = None

    def persistent_state(self) -> dict:
        """Everything this device keeps between sessions."""
        state = {"device_id": self.device_id, "index": self.index,
                 "modalities": [m.value for m in self.modalities]}
        if self._persistent_signer is not None:
            state["key_share_value"] = self._persistent_signer._share.value
        return state


# ---------------------------------------------------------------------------
# Personal device (gateway)
# ---------------------------------------------------------------------------

class PersonalDevice(_Transcript):
    """The user's gateway: holds per-case key material, helper data and
    the fusion policy; orchestrates score fusion and the signing ceremony."""

    def __init__(self, user_id: str, policy: FusionPolicy,
                 score_mode: str = "local-bypass"):
        super().__init__()
        if score_mode not in ("local-bypass", "cloud-plain",
                              "cloud-encrypted"):
            raise ParameterError(f"unknown score mode {score_mode!r}")
        self.user_id = user_id
        self.entity_id = "pd"
        self.policy = policy
        self.score_mode = score_mode
        self.strategy: CaseStrategy | None = None
        self.pubkey: GroupPublicKey | None = None
        self.commitments: FeldmanCommitments | None = None
        self._secret_key: int | None = None          # CASE1 only
        self._own_signer: DeviceSigner | None = None  # optional PD share
        self.helper_store: dict = {}                  # CASE3: index -> HD
        self.paillier: PheKeypair | None = None
        self.reading_buffer: list = []

    def buffer_reading(self, reading: ModalityReading) -> None:
        self.reading_buffer.append(reading)

    def persistent_state(self) -> dict:
        state = {"user_id": self.user_id,
                 "score_mode": self.score_mode,
                 "helper_data": {i: hd.to_json()
                                 for i, hd in self.helper_store.items()}}
        if self._secret_key is not None:
            state["secret_key"] = self._secret_key
        if self._own_signer is not None:
            state["key_share_value"] = self._own_signer._share.value
        return state


def enroll(user_id: str, strategy: CaseStrategy, params: ThresholdParams,
           group: GroupParams, pd: PersonalDevice, dds,
           rng: random.Random, enrolment_templates: dict | None = None,
           paillier_keypair: PheKeypair | None = None) -> RegistrationRecord:
    """Trusted-dealer enrolment run on the PD.

    Generates the keypair, distributes material per the case strategy,
    and returns the record the SP stores. The dealer's secret and
    polynomial exist only inside this call; with CASE3 the per-device
    shares and enrolment templates are likewise gone when it returns,
    leaving only helper data on the PD.
    """
    dds = list(dds)
    pd.strategy = strategy
    pd.paillier = paillier_keypair

    if strategy.case is Case.CASE1:
        pubkey, shares, commitments = keygen_dealer(
            ThresholdParams(t=0, n=1), group, rng)
        pd._secret_key = shares[0].value
        pd.pubkey = pubkey
        pd.commitments = commitments
        return RegistrationRecord(user_id=user_id, pubkey=pubkey)

    pubkey, shares, commitments = keygen_dealer(params, group, rng)
    pd.pubkey = pubkey
    pd.commitments = commitments

    share_targets = list(shares)
    if strategy.pd_holds_share:
        pd._own_signer = DeviceSigner(share_targets[0], group)
        share_targets = share_targets[1:]
    if len(dds) < len(share_targets):
        raise ParameterError(
            f"need {len(share_targets)} devices for the remaining shares, "
            f"got {len(dds)}")
    by_index = {dd.index: dd for dd in dds}
    if strategy.case is Case.CASE3 and enrolment_templates is None:
        raise ParameterError("CASE3 enrolment needs one template per DD")

    for share in share_targets:
        dd = by_index.get(share.index)
        if dd is None:
            raise ParameterError(
                f"no device with index {share.index} to hold its share")
        if strategy.case is Case.CASE2:
            dd.install_key_share(share, group)
            continue
        template = enrolment_templates.get(share.index)
        if template is None:
            raise ParameterError(
                f"missing enrolment template for device {share.index}")
        bits = scalar_to_bits(share.value, strategy.code.m)
        pd.helper_store[share.index] = fe_enroll(bits, template,
                                                 strategy.code)
        # share bits and template go out of scope here; the DD keeps
        # nothing and the PD keeps only the helper data
    return RegistrationRecord(user_id=user_id, pubkey=pubkey)


# ---------------------------------------------------------------------------
# The authentication flow
# ---------------------------------------------------------------------------

def _denied(pd: PersonalDevice, session: str, reason: str) -> Message:
    msg = Message(type=MessageType.AUTH_RESULT, sender=pd.entity_id,
                  receiver="user", session_id=session,
                  payload={"granted": False, "reason": reason})
    pd.record(msg)
    return msg


class _Flow:
    """One authentication attempt driven by the PD."""

    def __init__(self, pd, dds, fasp, rng, transit_hook, challenge_fn):
        self.pd = pd
        self.dds = sorted(dds, key=lambda d: d.index)
        self.fasp = fasp
        self.rng = rng
        self.hook = transit_hook or (lambda m: m)
        self.challenge_fn = challenge_fn
        self.messages: list = []

    def send(self, msg: Message, sender_entity, receiver_entity) -> Message:
        """Route one message: the transit hook may tamper with it; both
        ends record what they actually saw."""
        if sender_entity is not None:
            sender_entity.record(msg)
        delivered = self.hook(msg)
        if receiver_entity is not None:
            receiver_entity.record(delivered)
        self.messages.append(delivered)
        return delivered


def pd_run_authentication(pd: PersonalDevice, dds, challenge: Message,
                          now: int, rng: random.Random,
                          fasp: FaspService | None = None,
                          transit_hook=None,
                          challenge_fn=compute_challenge_scalar):
    """Run the PD-orchestrated part of the flow.

    Returns the ordered list of messages it produced, ending with either
    an AuthResponse for the SP or a locally emitted denied AuthResult.
    If the score gate fails, no signing message is ever sent.
    """
    flow = _Flow(pd, dds, fasp, rng, transit_hook, challenge_fn)
    pd.record(challenge)
    session = challenge.session_id
    sp_id = challenge.payload["sp_id"]
    nonce = bytes.fromhex(challenge.payload["nonce"])
    live = [dd for dd in flow.dds]

    try:
        # Step 3a: collect sensor readings from every live device.
        for dd in live:
            for reading in dd.read_sensor(now):
                msg = Message(type=MessageType.SENSOR_READING,
                              sender=dd.device_id, receiver=pd.entity_id,
                              session_id=session,
                              payload=reading.to_json())
                delivered = flow.send(msg, dd, pd)
                p = delivered.payload
                pd.buffer_reading(ModalityReading(
                    device_id=p["device_id"], modality=Modality(p["modality"]),
                    score=p["score"], timestamp=p["timestamp"]))

        # Step 3b: fuse and gate. The local fusion over raw readings is
        # always computed; cloud modes must agree with it to be believed.
        score = _compute_auth_score(flow, session, now)
        if not gate(score, pd.policy):
            return flow.messages + [_denied(pd, session, "score")]

        # Step 4: the signing ceremony of the active case.
        message_bytes = signing_message_bytes(sp_id, nonce)
        try:
            signature = _sign_ceremony(flow, session, message_bytes, live)
        except InsufficientSharesError:
            return flow.messages + [_denied(pd, session,
                                            "insufficient-devices")]
        except InvalidPartialError:
            return flow.messages + [_denied(pd, session, "invalid-partial")]

        # Step 5: answer the challenge.
        response = Message(type=MessageType.AUTH_RESPONSE,
                           sender=pd.entity_id, receiver=sp_id,
                           session_id=session,
                           payload={"user_id": pd.user_id,
                                    "nonce": nonce.hex(),
                                    "signature": signature.to_json()})
        flow.send(response, pd, None)
        return flow.messages
    finally:
        for dd in live:
            dd.end_session(session)
        pd.reading_buffer.clear()


def _compute_auth_score(flow: _Flow, session: str, now: int) -> AuthScore:
    pd = flow.pd
    local = fuse_local(pd.reading_buffer, pd.policy, now)
    if pd.score_mode == "local-bypass" or not local.contributing:
        return local
    if flow.fasp is None:
        raise ParameterError(
            f"score mode {pd.score_mode!r} needs a scoring service")

    means = modality_means(pd.reading_buffer, pd.policy, now)
    if pd.score_mode == "cloud-plain":
        payload = {"user_id": pd.user_id, "mode": "plain",
                   "scores": {m.value: quantize_score(v)
                              for m, v in means.items()}}
    else:
        pub = pd.paillier.public
        payload = {"user_id": pd.user_id, "mode": "encrypted",
                   "ciphertexts": {
                       m.value: format(
                           phe_encrypt(quantize_score(v), pub, flow.rng), "x")
                       for m, v in means.items()}}
    # Note: no sp_id in the payload; the scoring service must not learn
    # where the user is authenticating.
    request = Message(type=MessageType.SCORE_REQUEST, sender=pd.entity_id,
                      receiver=flow.fasp.fasp_id, session_id=session,
                      payload=payload)
    delivered = flow.send(request, pd, None)
    reply = flow.fasp.handle_score_request(delivered)
    reply = flow.send(reply, None, pd)

    if pd.score_mode == "cloud-plain":
        cloud_value = float(reply.payload["value"])
    else:
        fused = int(reply.payload["ciphertext"], 16)
        weights = pd.policy.integer_weights(means.keys())
        cloud_value = normalize_fused(phe_decrypt(fused, pd.paillier),
                                      weights)
    if abs(cloud_value - local.value) > CLOUD_AGREEMENT_TOL:
        # Tampered or forged response: distrust it, gate on raw readings.
        return local
    return AuthScore(value=cloud_value, contributing=local.contributing,
                     mode="cloud")


def _sign_ceremony(flow: _Flow, session: str, message_bytes: bytes,
                   live) -> Signature:
    pd = flow.pd
    strategy = pd.strategy
    group = pd.pubkey.group
    quorum = pd.pubkey.params.t + 1

    if strategy.case is Case.CASE1:
        signer = DeviceSigner(Share(index=1, value=pd._secret_key), group)
        commitment = signer.round1(session, flow.rng)
        c = flow.challenge_fn(commitment.commitment, pd.pubkey.y,
                              message_bytes, group)
        partial = signer.round2(session, c, [1])
        return combine([commitment], [partial], pd.pubkey, message_bytes,
                       challenge_fn=flow.challenge_fn)

    if strategy.case is Case.CASE2:
        ready = [dd for dd in live if dd._persistent_signer is not None]
    else:  # CASE3: deliver helper data; a device joins only if its
        # regenerated share passes the commitment check.
        ready = []
        for dd in live:
            helper = pd.helper_store.get(dd.index)
            if helper is None:
                continue
            delivery = Message(type=MessageType.HELPER_DELIVERY,
                               sender=pd.entity_id, receiver=dd.device_id,
                               session_id=session,
                               payload={"helper": helper.to_json(),
                                        "commitments":
                                            pd.commitments.to_json()})
            delivered = flow.send(delivery, pd, dd)
            ok = dd.receive_helper(
                HelperData.from_json(delivered.payload["helper"]),
                FeldmanCommitments.from_json(
                    delivered.payload["commitments"]),
                group, session)
            if ok:
                ready.append(dd)

    participants: list = []   # (index, round1 target)
    if pd._own_signer is not None:
        participants.append((pd._own_signer.index, None))
    participants.extend((dd.index, dd) for dd in ready)
    participants.sort(key=lambda pair: pair[0])
    if len(participants) < quorum:
        raise InsufficientSharesError(
            f"{len(participants)} signer(s) available, need {quorum}")
    chosen = participants[:quorum]
    signer_set = [index for index, _ in chosen]

    commitments = []
    for index, dd in chosen:
        if dd is None:
            commitments.append(pd._own_signer.round1(session, flow.rng))
            continue
        ask = Message(type=MessageType.SIGN_ROUND1, sender=pd.entity_id,
                      receiver=dd.device_id, session_id=session,
                      payload={"signer": index})
        flow.send(ask, pd, dd)
        com = dd.sign_round1(session, flow.rng)
        answer = Message(type=MessageType.SIGN_ROUND1, sender=dd.device_id,
                         receiver=pd.entity_id, session_id=session,
                         payload={"index": com.index,
                                  "R": format(com.commitment, "x")})
        delivered = flow.send(answer, dd, pd)
        commitments.append(NonceCommitment(
            index=int(delivered.payload["index"]),
            commitment=int(delivered.payload["R"], 16),
            session_id=session))

    R = 1
    for com in commitments:
        R = R * com.commitment % group.p
    c = flow.challenge_fn(R, pd.pubkey.y, message_bytes, group)

    partials = []
    for index, dd in chosen:
        if dd is None:
            partials.append(pd._own_signer.round2(session, c, signer_set))
            continue
        ask = Message(type=MessageType.SIGN_ROUND2, sender=pd.entity_id,
                      receiver=dd.device_id, session_id=session,
                      payload={"challenge": format(c, "x"),
                               "signer_set": signer_set})
        flow.send(ask, pd, dd)
        part = dd.sign_round2(session, c, signer_set)
        answer = Message(type=MessageType.SIGN_ROUND2, sender=dd.device_id,
                         receiver=pd.entity_id, session_id=session,
                         payload={"index": part.index,
                                  "s": format(part.s, "x")})
        delivered = flow.send(answer, dd, pd)
        partials.append(PartialSignature(
            index=int(delivered.payload["index"]),
            s=int(delivered.payload["s"], 16), session_id=session))

    return combine(commitments, partials, pd.pubkey, message_bytes,
                   challenge_fn=flow.challenge_fn)
