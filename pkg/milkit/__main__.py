from milkit.main import app

app(prog_name="milkit")
