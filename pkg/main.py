"""
RIO-CPD - 命令列入口
"""
from app.index import app

if __name__ == "__main__":
    app()
